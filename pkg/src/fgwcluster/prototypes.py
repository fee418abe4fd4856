"""Momentum state for the prototype graph and the prototype marginal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PrototypeState:
    B: np.ndarray
    nu: np.ndarray
    beta1: float = 0.99
    beta2: float = 0.999

    def copy(self) -> "PrototypeState":
        return PrototypeState(self.B.copy(), self.nu.copy(), self.beta1, self.beta2)


def init_state(n_prototypes: int, beta1: float = 0.99, beta2: float = 0.999) -> PrototypeState:
    """Identity prototype graph and uniform marginal."""
    if n_prototypes < 2:
        raise ValueError("need at least two prototypes")
    for b in (beta1, beta2):
        if not 0.0 <= b <= 1.0:
            raise ValueError("momentum weights must lie in [0, 1]")
    return PrototypeState(np.eye(n_prototypes), np.full(n_prototypes, 1.0 / n_prototypes), beta1, beta2)


def coactivation(P: np.ndarray) -> np.ndarray:
    """``P^T P`` scaled by its largest entry so it lives in [0, 1]."""
    G = P.T @ P
    G = 0.5 * (G + G.T)
    top = G.max()
    return G / top if top > 0 else G


def update_B(state: PrototypeState, P: np.ndarray) -> np.ndarray:
    if state.beta1 == 1.0:
        return state.B.copy()
    return state.beta1 * state.B + (1.0 - state.beta1) * coactivation(P)


def update_nu(state: PrototypeState, P: np.ndarray) -> np.ndarray:
    if state.beta2 == 1.0:
        return state.nu.copy()
    mass = P.sum(axis=0) / P.shape[0]
    nu = state.beta2 * state.nu + (1.0 - state.beta2) * mass
    return nu / nu.sum()


def step_views(state: PrototypeState, P1: np.ndarray, P2: np.ndarray):
    """Blend view 1 into the state, then view 2 into the result.

    Returns ``(B1, nu1, B2, nu2, new_state)``; ``state`` itself is not mutated.
    """
    B1, nu1 = update_B(state, P1), update_nu(state, P1)
    mid = PrototypeState(B1, nu1, state.beta1, state.beta2)
    B2, nu2 = update_B(mid, P2), update_nu(mid, P2)
    return B1, nu1, B2, nu2, PrototypeState(B2.copy(), nu2.copy(), state.beta1, state.beta2)
