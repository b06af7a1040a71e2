"""Item-selection policies.

Every selector consumes exactly one uniform draw from its stream per call,
so the policy stream stays aligned across policies and across runs that
differ only in other noise sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, ContractError, ItemCatalog, RngStream

POLICY_KINDS = ("uniform", "constant", "greedy", "softmax", "persistent_softmax")
MOMENTUM_MODES = ("normalized", "raw")


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "softmax"
    beta: float = 1.0
    constant_index: int = 0
    persistent_norm_scaling: bool = False
    # movement of the unit-length estimate ("normalized") or of the raw estimate
    momentum: str = "normalized"

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"policy kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        if not (isinstance(self.beta, (int, float)) and math.isfinite(self.beta) and self.beta >= 0):
            raise ConfigError(f"beta must be finite and >= 0, got {self.beta!r}")
        if isinstance(self.constant_index, bool) or int(self.constant_index) != self.constant_index \
                or self.constant_index < 0:
            raise ConfigError(f"constant_index must be a non-negative integer, got {self.constant_index!r}")
        if self.momentum not in MOMENTUM_MODES:
            raise ConfigError(f"momentum must be one of {MOMENTUM_MODES}, got {self.momentum!r}")

    def validate_for(self, n: int):
        if self.kind == "constant" and self.constant_index >= n:
            raise ConfigError(f"constant_index {self.constant_index} out of range for {n} items")


def score_items(estimate, catalog: ItemCatalog) -> np.ndarray:
    """Predicted ratings ``<estimate, v_i>`` for every item.

    Pass the true preference instead of the estimate for oracle scoring.
    """
    u = np.asarray(estimate, dtype=float)
    if u.shape != (catalog.d,):
        raise ContractError(f"estimate shape {u.shape} does not match catalog dimension {catalog.d}")
    return catalog.items @ u


def select_uniform(n: int, rng: RngStream) -> int:
    return rng.index(n)


def select_constant(cfg: PolicyConfig) -> int:
    return cfg.constant_index


def select_greedy(scores: np.ndarray, rng: RngStream) -> int:
    """Argmax of ``scores``; exact ties are broken uniformly at random."""
    u = rng.uniform()
    best = np.flatnonzero(scores == scores.max())
    if len(best) == 1:
        return int(best[0])
    return int(best[min(int(u * len(best)), len(best) - 1)])


def softmax_probabilities(scores: np.ndarray, beta_eff: float) -> np.ndarray:
    """Normalized ``exp(beta_eff * s_i)``, computed after max-subtraction."""
    s = np.asarray(scores, dtype=float)
    w = np.exp(beta_eff * (s - s.max()))
    return w / w.sum()


def _draw(weights: np.ndarray, u: float) -> int:
    c = weights.cumsum()
    i = int(c.searchsorted(u * c[-1], side="right"))
    return min(i, len(weights) - 1)


def effective_beta(beta: float, estimate_norm: float) -> float | None:
    """``beta / estimate_norm``; None signals the uniform fallback for a zero estimate."""
    if estimate_norm == 0:
        return None
    return beta / estimate_norm


def select_softmax(scores: np.ndarray, beta: float, estimate_norm: float, rng: RngStream) -> int:
    """Sample with probability proportional to ``exp(beta / estimate_norm * score)``."""
    u = rng.uniform()
    beta_eff = effective_beta(beta, estimate_norm)
    if beta_eff is None or beta_eff == 0:
        return min(int(u * len(scores)), len(scores) - 1)
    return _draw(np.exp(beta_eff * (scores - scores.max())), u)


def _movement(now: np.ndarray, prev: np.ndarray, normalize: bool,
              now_norm: float | None = None, prev_norm: float | None = None) -> np.ndarray | None:
    if normalize:
        a = math.sqrt(float(now @ now)) if now_norm is None else now_norm
        b = math.sqrt(float(prev @ prev)) if prev_norm is None else prev_norm
        if a == 0 or b == 0:
            return None
        step = now / a - prev / b
    else:
        step = now - prev
    return step if step.any() else None


def momentum_mask(estimate_now, estimate_prev, catalog: ItemCatalog,
                  normalize: bool = True) -> np.ndarray | None:
    """Items strictly inside the half-space the estimate moved into.

    With ``normalize`` the movement is taken between unit-length estimates,
    i.e. the direction the estimate is turning.  None when no movement
    direction exists or no item qualifies.
    """
    if estimate_prev is None:
        return None
    now = np.asarray(estimate_now, dtype=float)
    prev = np.asarray(estimate_prev, dtype=float)
    if now.shape != (catalog.d,) or prev.shape != (catalog.d,):
        raise ContractError("estimate dimensions do not match catalog")
    step = _movement(now, prev, normalize)
    if step is None:
        return None
    mask = catalog.items @ step > 0
    return mask if mask.any() else None


def select_persistent_softmax(scores: np.ndarray, beta: float, estimate_now, estimate_prev,
                              catalog: ItemCatalog, rng: RngStream, norm_scaling: bool = False,
                              momentum: str = "normalized", norms: tuple | None = None) -> int:
    """Softmax restricted to items in the direction of the latest estimate movement.

    Without ``norm_scaling`` the temperature is applied to raw scores.  Falls
    back to the unrestricted softmax (same temperature) on the first step,
    when the estimate did not move, or when the half-space holds no item.
    ``norms`` optionally passes precomputed ``(|now|, |prev|)``.
    """
    now = np.asarray(estimate_now, dtype=float)
    now_norm, prev_norm = norms if norms is not None else (math.sqrt(float(now @ now)), None)
    norm = now_norm if norm_scaling else 1.0
    allowed = None
    if estimate_prev is not None:
        prev = np.asarray(estimate_prev, dtype=float)
        if now.shape != (catalog.d,) or prev.shape != (catalog.d,):
            raise ContractError("estimate dimensions do not match catalog")
        step = _movement(now, prev, momentum == "normalized", now_norm, prev_norm)
        if step is not None:
            allowed = (catalog.items @ step > 0).nonzero()[0]
    if allowed is None or allowed.size == 0:
        return select_softmax(scores, beta, norm, rng)
    u = rng.uniform()
    beta_eff = effective_beta(beta, norm)
    if beta_eff is None or beta_eff == 0:
        return int(allowed[min(int(u * len(allowed)), len(allowed) - 1)])
    sub = scores[allowed]
    return int(allowed[_draw(np.exp(beta_eff * (sub - sub.max())), u)])


def persistent_probabilities(scores: np.ndarray, beta_eff: float, mask: np.ndarray | None) -> np.ndarray:
    """Selection distribution of the persistent policy over all items."""
    if mask is None:
        return softmax_probabilities(scores, beta_eff)
    p = np.zeros(len(scores))
    p[mask] = softmax_probabilities(np.asarray(scores)[mask], beta_eff)
    return p
