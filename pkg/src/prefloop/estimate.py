"""Online gradient descent estimate of the user preference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, ContractError


@dataclass(frozen=True, eq=False)
class EstimatorState:
    u: np.ndarray
    alpha: float = 0.05
    eta: float = 0.01

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim != 1 or not np.all(np.isfinite(u)):
            raise ContractError("estimate must be a finite vector")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigError(f"alpha must be > 0, got {self.alpha!r}")
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise ConfigError(f"eta must be >= 0, got {self.eta!r}")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


def squared_loss(u, item, rating: float, eta: float) -> float:
    """``0.5 * ((rating - <u, item>)**2 + eta * |u|**2)``."""
    u = np.asarray(u, dtype=float)
    resid = rating - float(u @ np.asarray(item, dtype=float))
    return 0.5 * (resid * resid + eta * float(u @ u))


def ogd_step(u: np.ndarray, item: np.ndarray, rating: float, score: float,
             alpha: float, eta: float) -> np.ndarray:
    return (1.0 - alpha * eta) * u + (alpha * (rating - score)) * item


def ogd_update(state: EstimatorState, item, observed_rating: float, predicted_score: float) -> EstimatorState:
    """One gradient step on the regularized squared loss of the observed rating.

    ``predicted_score`` must be ``<state.u, item>``; the caller has it already.
    """
    v = np.asarray(item, dtype=float)
    if v.shape != state.u.shape:
        raise ContractError(f"item shape {v.shape} does not match estimate shape {state.u.shape}")
    return EstimatorState(ogd_step(state.u, v, observed_rating, predicted_score, state.alpha, state.eta),
                          state.alpha, state.eta)
