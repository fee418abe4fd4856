"""Contrastive training loop with swapped fused-GW assignments, and inference."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy.sparse as sp

from . import io as fgmio
from .encoder import (
    AdamState,
    GradientTape,
    ModelParams,
    adam_step,
    compute_R,
    forward,
    init_params,
    loss_and_grads,
    softmax,
)
from .graph import AttributeGraph, AugmentationConfig, augment, gcn_normalize, normalize_adjacency
from .metrics import KMeansResult, kmeans
from .ot import DegenerateCouplingError, Marginals, OTConfig, coupling_to_assignment, entropic_fgw
from .prototypes import PrototypeState, init_state, step_views

logger = logging.getLogger(__name__)


class NumericalAbort(FloatingPointError):
    """Training produced a non-finite loss or a degenerate coupling."""


@dataclass
class Ablation:
    no_B: bool = False
    no_A: bool = False
    fixed_momentum: bool = False


@dataclass
class Dims:
    d1: int = 256
    d_h: int = 256
    d: int = 64


@dataclass
class TrainConfig:
    """Training hyperparameters. Field names double as JSON keys."""

    S: int = 18
    alpha: float = 0.5
    tau: float = 0.5
    pe: float = 0.2
    px: float = 0.2
    epochs: int = 100
    lr: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.99
    beta2: float = 0.999
    ot: OTConfig = field(default_factory=OTConfig)
    seed: int = 0
    ablation: Ablation = field(default_factory=Ablation)
    dims: Dims = field(default_factory=Dims)
    n_clusters: int | None = None
    kmeans_n_init: int = 10

    def __post_init__(self):
        if isinstance(self.ot, dict):
            self.ot = OTConfig(**self.ot)
        if isinstance(self.ablation, dict):
            self.ablation = Ablation(**self.ablation)
        if isinstance(self.dims, dict):
            self.dims = Dims(**self.dims)
        self.ot = self.ot.with_alpha(self.alpha)
        AugmentationConfig(self.pe, self.px)
        if self.S < 2:
            raise ValueError("S must be at least 2")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not self.lr > 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive and weight_decay non-negative")
        for b in (self.beta1, self.beta2):
            if not 0.0 <= b <= 1.0:
                raise ValueError("momentum weights must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def momentum(self) -> tuple[float, float]:
        if self.ablation.fixed_momentum:
            return 1.0, 1.0
        return self.beta1, self.beta2


@dataclass
class TrainedModel:
    params: ModelParams
    proto_state: PrototypeState
    config: TrainConfig
    loss_trace: list = field(default_factory=list)

    def save(self, path) -> None:
        tensors = dict(self.params.as_dict())
        tensors["proto_B"] = self.proto_state.B
        tensors["proto_nu"] = self.proto_state.nu
        meta = {
            "config": self.config.to_dict(),
            "proto_betas": [self.proto_state.beta1, self.proto_state.beta2],
            "loss_trace": list(self.loss_trace),
        }
        fgmio.write_tensors(path, tensors, meta)

    @classmethod
    def load(cls, path) -> "TrainedModel":
        tensors, meta = fgmio.read_tensors(path)
        B, nu = tensors.pop("proto_B"), tensors.pop("proto_nu")
        beta1, beta2 = meta["proto_betas"]
        return cls(ModelParams(**tensors), PrototypeState(B, nu, beta1, beta2), TrainConfig.from_dict(meta["config"]), meta["loss_trace"])


def _encode_view(view: AttributeGraph, params: ModelParams):
    tape = GradientTape()
    Z = forward(normalize_adjacency(view.adjacency), view.features, params, tape)
    return tape, Z


def _assignment(R, A, B, nu, cfg: TrainConfig):
    n = R.shape[0]
    marg = Marginals.with_floor(np.full(n, 1.0 / n), nu)
    coupling = entropic_fgw(-R, A, B, marg, cfg.ot)
    if not coupling.converged:
        logger.debug("sinkhorn stopped at residual %.2e", coupling.residual)
    return coupling_to_assignment(coupling)


def train_epoch(g: AttributeGraph, params: ModelParams, state: PrototypeState, opt: AdamState, cfg: TrainConfig, rng) -> tuple[float, PrototypeState]:
    """One optimizer step. ``params`` and ``opt`` are updated in place; the
    new prototype state is returned."""
    aug = AugmentationConfig(cfg.pe, cfg.px)
    view1, view2 = augment(g, aug, rng), augment(g, aug, rng)
    tape1, Z1 = _encode_view(view1, params)
    tape2, Z2 = _encode_view(view2, params)
    R1, R2 = compute_R(Z1, params.prototypes), compute_R(Z2, params.prototypes)
    if not (np.isfinite(R1).all() and np.isfinite(R2).all()):
        raise NumericalAbort("non-finite node-prototype similarities (check features and parameters)")
    P1, P2 = softmax(R1), softmax(R2)
    B1, nu1, B2, nu2, state = step_views(state, P1, P2)
    if cfg.ablation.no_B:
        B1 = B2 = np.eye(cfg.S)
    if cfg.ablation.no_A:
        A1 = A2 = sp.identity(g.n_nodes, format="csr")
    else:
        A1, A2 = view1.adjacency, view2.adjacency
    Q1 = _assignment(R1, A1, B1, nu1, cfg)
    Q2 = _assignment(R2, A2, B2, nu2, cfg)
    loss, grads = loss_and_grads(((tape1, Z1), (tape2, Z2)), Q1, Q2, params, cfg.tau)
    if not math.isfinite(loss) or not all(np.isfinite(v).all() for v in grads.values()):
        raise NumericalAbort(f"non-finite loss or gradient (loss={loss})")
    adam_step(params, grads, opt)
    return loss, state


def train(g: AttributeGraph, cfg: TrainConfig, callback=None) -> TrainedModel:
    """Run ``cfg.epochs`` epochs of two-view training on ``g``.

    Everything random derives from ``cfg.seed``: parameter init from one
    stream, all augmentations (two views per epoch, drawn in order) from
    another.
    """
    g.validate()
    if g.n_classes is not None and cfg.S < g.n_classes:
        logger.warning("S=%d prototypes is fewer than %d classes", cfg.S, g.n_classes)
    init_seq, aug_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    dims = cfg.dims
    params = init_params(g.n_features, dims.d1, dims.d_h, dims.d, cfg.S, np.random.default_rng(init_seq))
    beta1, beta2 = cfg.momentum
    state = init_state(cfg.S, beta1, beta2)
    opt = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(aug_seq)
    trace = []
    for epoch in range(cfg.epochs):
        try:
            loss, state = train_epoch(g, params, state, opt, cfg, rng)
        except (NumericalAbort, DegenerateCouplingError) as exc:
            raise NumericalAbort(f"epoch {epoch}: {exc}") from exc
        trace.append(loss)
        if callback is not None:
            callback(epoch, loss)
    return TrainedModel(params, state, cfg, trace)


def infer(g: AttributeGraph, model: TrainedModel) -> np.ndarray:
    """Context-aware representation of the un-augmented graph."""
    d0 = model.params.gcn_weight.shape[0]
    if g.n_features != d0:
        raise ValueError(f"graph has {g.n_features} features, model was trained on {d0}")
    Z = forward(gcn_normalize(g), g.features, model.params)
    return compute_R(Z, model.params.prototypes)


def cluster(g: AttributeGraph, model: TrainedModel, n_clusters: int | None = None, seed: int | None = None) -> KMeansResult:
    """K-means on :func:`infer` output."""
    cfg = model.config
    n_clusters = n_clusters or cfg.n_clusters or g.n_classes
    if n_clusters is None:
        raise ValueError("number of clusters unknown: set n_clusters or provide labels")
    R = infer(g, model)
    return kmeans(R, n_clusters, n_init=cfg.kmeans_n_init, seed=cfg.seed if seed is None else seed)
