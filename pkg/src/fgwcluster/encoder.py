"""GCN encoder, MLP projector and prototype head with hand-written gradients.

The network is fixed: one GCN layer, a two-layer ReLU projector, row-wise
L2 normalization, then cosine similarity against L2-normalized prototypes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.special import xlogy

PARAM_NAMES = ("gcn_weight", "gcn_bias", "proj_weight1", "proj_bias1", "proj_weight2", "proj_bias2", "prototypes")


@dataclass
class ModelParams:
    gcn_weight: np.ndarray
    gcn_bias: np.ndarray
    proj_weight1: np.ndarray
    proj_bias1: np.ndarray
    proj_weight2: np.ndarray
    proj_bias2: np.ndarray
    prototypes: np.ndarray

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.as_dict().items()})

    @property
    def dims(self) -> dict:
        return {
            "d0": self.gcn_weight.shape[0],
            "d1": self.gcn_weight.shape[1],
            "d_h": self.proj_weight1.shape[1],
            "d": self.proj_weight2.shape[1],
            "S": self.prototypes.shape[0],
        }


def kaiming_uniform(shape, fan_in: int, rng: np.random.Generator, gain: float = math.sqrt(2.0)) -> np.ndarray:
    """He-uniform samples: ``U(-b, b)`` with ``b = gain * sqrt(3 / fan_in)``,
    i.e. variance ``gain**2 / fan_in`` (``2 / fan_in`` for ReLU gain)."""
    if fan_in < 1:
        raise ValueError("fan_in must be at least 1")
    bound = gain * math.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(d0: int, d1: int, d_h: int, d: int, n_prototypes: int, rng: np.random.Generator) -> ModelParams:
    # weights are stored (in, out) so fan_in is the leading dim; biases start at zero
    return ModelParams(
        gcn_weight=kaiming_uniform((d0, d1), d0, rng),
        gcn_bias=np.zeros(d1),
        proj_weight1=kaiming_uniform((d1, d_h), d1, rng),
        proj_bias1=np.zeros(d_h),
        proj_weight2=kaiming_uniform((d_h, d), d_h, rng),
        proj_bias2=np.zeros(d),
        prototypes=kaiming_uniform((n_prototypes, d), d, rng),
    )


def normalize_rows(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise L2 normalization; zero rows stay zero. Returns ``(Y, norms)``."""
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return X / safe[:, None], norms


def _normalize_rows_backward(dY, Y, norms):
    safe = np.where(norms > 0, norms, 1.0)
    dX = (dY - Y * (Y * dY).sum(axis=1, keepdims=True)) / safe[:, None]
    dX[norms == 0] = 0.0
    return dX


class GradientTape:
    """Activations of one forward pass. ``backward`` may consume it once."""

    def __init__(self):
        self.records = None
        self.used = False


def forward(adj_norm, X, params: ModelParams, tape: GradientTape | None = None) -> np.ndarray:
    """Encode a graph view into unit-norm rows ``Z`` of shape ``(N, d)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != params.gcn_weight.shape[0]:
        raise ValueError(f"features have {X.shape[1]} columns, encoder expects {params.gcn_weight.shape[0]}")
    if adj_norm.shape != (X.shape[0], X.shape[0]):
        raise ValueError("adjacency and feature row counts differ")
    XW = X @ params.gcn_weight
    H_pre = adj_norm @ XW + params.gcn_bias
    H = np.maximum(H_pre, 0.0)
    U_pre = H @ params.proj_weight1 + params.proj_bias1
    U = np.maximum(U_pre, 0.0)
    Z_raw = U @ params.proj_weight2 + params.proj_bias2
    Z, norms = normalize_rows(Z_raw)
    if tape is not None:
        if tape.records is not None:
            raise RuntimeError("tape already holds a forward pass")
        tape.records = dict(adj=adj_norm, X=X, H_pre=H_pre, H=H, U_pre=U_pre, U=U, Z=Z, z_norms=norms)
    return Z


def compute_R(Z: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
    """Cosine similarities between node embeddings and prototypes."""
    S_hat, _ = normalize_rows(prototypes)
    return Z @ S_hat.T


def softmax(R: np.ndarray, tau: float = 1.0) -> np.ndarray:
    if not tau > 0:
        raise ValueError("temperature must be positive")
    logits = R / tau
    logits = logits - logits.max(axis=1, keepdims=True)
    E = np.exp(logits)
    return E / E.sum(axis=1, keepdims=True)


def log_softmax(R: np.ndarray, tau: float = 1.0) -> np.ndarray:
    logits = R / tau
    m = logits.max(axis=1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=1, keepdims=True))


def swapped_loss(Q1, Q2, P1, P2) -> float:
    """Cross-view cross-entropy: each view's prediction is scored against the
    other view's assignment, averaged over ``2N`` rows. Terms with ``Q = 0``
    contribute nothing, even where ``P`` underflowed to 0."""
    n = Q1.shape[0]
    return float(-(np.sum(xlogy(Q1, P2)) + np.sum(xlogy(Q2, P1))) / (2 * n))


def swapped_loss_from_logits(R1, R2, Q1, Q2, tau: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss and its gradients w.r.t. ``R1`` and ``R2`` (``Q`` held constant)."""
    n = R1.shape[0]
    logp1, logp2 = log_softmax(R1, tau), log_softmax(R2, tau)
    loss = float(-(np.sum(Q1 * logp2) + np.sum(Q2 * logp1)) / (2 * n))
    # d/dR of -sum q log softmax(R/tau) is (softmax * rowsum(q) - q) / tau
    dR1 = (np.exp(logp1) * Q2.sum(axis=1, keepdims=True) - Q2) / (2 * n * tau)
    dR2 = (np.exp(logp2) * Q1.sum(axis=1, keepdims=True) - Q1) / (2 * n * tau)
    return loss, dR1, dR2


def backward(tape: GradientTape, dZ: np.ndarray, params: ModelParams) -> dict:
    """Gradients of the encoder parameters given ``dL/dZ`` for one view."""
    if tape.records is None:
        raise RuntimeError("tape holds no forward pass")
    if tape.used:
        raise RuntimeError("tape already consumed by backward")
    tape.used = True
    r = tape.records
    dZ_raw = _normalize_rows_backward(dZ, r["Z"], r["z_norms"])
    g = {"proj_weight2": r["U"].T @ dZ_raw, "proj_bias2": dZ_raw.sum(axis=0)}
    dU_pre = (dZ_raw @ params.proj_weight2.T) * (r["U_pre"] > 0)
    g["proj_weight1"] = r["H"].T @ dU_pre
    g["proj_bias1"] = dU_pre.sum(axis=0)
    dH_pre = (dU_pre @ params.proj_weight1.T) * (r["H_pre"] > 0)
    g["gcn_bias"] = dH_pre.sum(axis=0)
    # adjacency is symmetric, so A^T dH = A dH
    g["gcn_weight"] = r["X"].T @ (r["adj"].T @ dH_pre)
    return g


def prototype_head_backward(Z1, Z2, dR1, dR2, prototypes):
    """Back-propagate ``dL/dR`` of both views into ``dL/dZ`` and ``dL/dprototypes``."""
    S_hat, norms = normalize_rows(prototypes)
    dZ1, dZ2 = dR1 @ S_hat, dR2 @ S_hat
    dS_hat = dR1.T @ Z1 + dR2.T @ Z2
    return dZ1, dZ2, _normalize_rows_backward(dS_hat, S_hat, norms)


def loss_and_grads(views, Q1, Q2, params: ModelParams, tau: float) -> tuple[float, dict]:
    """Swapped loss of two encoded views and gradients for every parameter.

    ``views`` is a pair of ``(tape, Z)`` from :func:`forward`.
    """
    (tape1, Z1), (tape2, Z2) = views
    R1, R2 = compute_R(Z1, params.prototypes), compute_R(Z2, params.prototypes)
    loss, dR1, dR2 = swapped_loss_from_logits(R1, R2, Q1, Q2, tau)
    dZ1, dZ2, dS = prototype_head_backward(Z1, Z2, dR1, dR2, params.prototypes)
    g1 = backward(tape1, dZ1, params)
    g2 = backward(tape2, dZ2, params)
    grads = {k: g1[k] + g2[k] for k in g1}
    grads["prototypes"] = dS
    return loss, grads


@dataclass
class AdamState:
    lr: float = 1e-3
    weight_decay: float = 0.0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: ModelParams, grads: dict, state: AdamState) -> None:
    """In-place Adam update with L2 weight decay added to the gradient."""
    state.step += 1
    b1, b2 = state.betas
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name in PARAM_NAMES:
        p = getattr(params, name)
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        if state.weight_decay:
            g = g + state.weight_decay * p
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
