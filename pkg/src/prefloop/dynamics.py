"""Preference-update rules: mere exposure, operant conditioning, hedonic adaptation.

Every rule returns the additive change ``pi_{t+1} - pi_t`` as a plain
numpy vector.  ``composite_update`` sums the weighted rules and adds
isotropic Gaussian preference noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, ContractError, InteractionHistory, PreferenceState, RngStream

SURPRISE_SIGNS = ("narrative", "literal")
SURPRISE_SCALES = ("scaled_arctan", "raw_arctan")


@dataclass(frozen=True)
class DynamicsConfig:
    gamma_me: float = 0.0
    gamma_oc: float = 0.0
    gamma_ha: float = 0.0
    discount_delta: float = 0.9
    pref_noise_std: float = 0.01
    surprise_sign: str = "narrative"
    surprise_scale: str = "scaled_arctan"

    def __post_init__(self):
        for name in ("gamma_me", "gamma_oc", "gamma_ha", "discount_delta"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and 0.0 <= val <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1], got {val!r}")
        total = self.gamma_me + self.gamma_oc + self.gamma_ha
        if total > 1.0 + 1e-12:
            raise ConfigError(f"gamma_me + gamma_oc + gamma_ha must be <= 1, got {total}")
        if not (math.isfinite(self.pref_noise_std) and self.pref_noise_std >= 0):
            raise ConfigError(f"pref_noise_std must be >= 0, got {self.pref_noise_std!r}")
        if self.surprise_sign not in SURPRISE_SIGNS:
            raise ConfigError(f"surprise_sign must be one of {SURPRISE_SIGNS}, got {self.surprise_sign!r}")
        if self.surprise_scale not in SURPRISE_SCALES:
            raise ConfigError(f"surprise_scale must be one of {SURPRISE_SCALES}, got {self.surprise_scale!r}")

    @property
    def is_static(self) -> bool:
        return self.gamma_me == 0 and self.gamma_oc == 0 and self.gamma_ha == 0


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def mere_exposure_delta(pi, item, gamma: float) -> np.ndarray:
    """Move a ``gamma`` fraction of the way from ``pi`` to ``item``."""
    pi, v = _pair(pi, item)
    return gamma * (v - pi)


def discounted_baseline(history: InteractionHistory | list, delta: float) -> float:
    """Discount-weighted mean of past observed ratings.

    The rating ``tau`` steps back gets weight ``delta**tau``.  An empty
    history gives 0 and ``delta == 0`` gives the most recent rating.
    """
    ratings = history.ratings() if isinstance(history, InteractionHistory) else list(history)
    if not ratings:
        return 0.0
    if delta == 0:
        return float(ratings[-1])
    num = den = 0.0
    w = 1.0
    for r in reversed(ratings):
        w *= delta
        num += w * r
        den += w
    if den == 0.0:
        # delta**tau underflowed past the first term
        return float(ratings[-1])
    return num / den


class DiscountedBaseline:
    """Running form of :func:`discounted_baseline`, O(1) per appended rating."""

    __slots__ = ("delta", "_num", "_den", "_last", "_count")

    def __init__(self, delta: float):
        self.delta = float(delta)
        self._num = 0.0
        self._den = 0.0
        self._last = 0.0
        self._count = 0

    def push(self, rating: float):
        d = self.delta
        self._num = d * (self._num + rating)
        self._den = d * (self._den + 1.0)
        self._last = rating
        self._count += 1

    @property
    def value(self) -> float:
        if self._count == 0:
            return 0.0
        if self.delta == 0 or self._den == 0.0:
            return self._last
        return self._num / self._den


def surprise(baseline: float, current_rating: float, cfg: DynamicsConfig) -> float:
    gap = current_rating - baseline
    if cfg.surprise_sign == "literal":
        gap = -gap
    if cfg.surprise_scale == "scaled_arctan":
        return (2.0 / math.pi) * math.atan(gap)
    return math.atan(gap)


def operant_conditioning_delta(pi, item, surp: float, gamma: float) -> np.ndarray:
    """Reinforcement step: toward ``item`` on positive surprise, toward ``-item`` on negative."""
    pi, v = _pair(pi, item)
    if surp == 0:
        return np.zeros_like(pi)
    sign = 1.0 if surp > 0 else -1.0
    return gamma * abs(surp) * (sign * v - pi)


def hedonic_adaptation_delta(pi, baseline_pref, gamma: float) -> np.ndarray:
    pi, b = _pair(pi, baseline_pref)
    return gamma * (b - pi)


def drift(pi: np.ndarray, item: np.ndarray, surp: float, baseline_pref: np.ndarray,
          cfg: DynamicsConfig) -> np.ndarray:
    """Noise-free combined change; disabled effects are skipped entirely."""
    delta = np.zeros_like(pi)
    if cfg.gamma_me:
        delta += cfg.gamma_me * (item - pi)
    if cfg.gamma_oc and surp != 0:
        sign = 1.0 if surp > 0 else -1.0
        delta += (cfg.gamma_oc * abs(surp)) * (sign * item - pi)
    if cfg.gamma_ha:
        delta += cfg.gamma_ha * (baseline_pref - pi)
    return delta


def mixing_weights(surp: float, cfg: DynamicsConfig) -> tuple[float, float, float]:
    """``(keep, toward_item, toward_baseline)`` with ``pi + drift == keep*pi + toward_item*v + toward_baseline*b``.

    ``keep`` is ``1 - (gamma_me + gamma_oc*|surp| + gamma_ha)``, which stays
    in [0, 1] whenever the gammas sum to at most 1 and ``|surp| <= 1``.
    """
    oc = cfg.gamma_oc * surp
    return (1.0 - (cfg.gamma_me + abs(oc) + cfg.gamma_ha), cfg.gamma_me + oc, cfg.gamma_ha)


def composite_update(pref: PreferenceState, item, rating: float, history: InteractionHistory,
                     cfg: DynamicsConfig, rng: RngStream | None = None) -> PreferenceState:
    """One preference step.

    ``history`` holds the interactions before the current one; the current
    observed ``rating`` is passed separately and drives the surprise.
    """
    pi, v = _pair(pref.pi, item)
    surp = 0.0
    if cfg.gamma_oc:
        surp = surprise(discounted_baseline(history, cfg.discount_delta), rating, cfg)
    new = pi + drift(pi, v, surp, pref.baseline, cfg)
    if cfg.pref_noise_std > 0:
        if rng is None:
            raise ContractError("preference noise is enabled but no rng was given")
        new = new + cfg.pref_noise_std * rng.normal(pi.shape[0])
    return pref.with_pi(new)
