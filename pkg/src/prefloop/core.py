"""Domain types, seeded random streams, sampling and the linear rating model."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration value, raised before any simulation step runs."""


class ContractError(ValueError):
    """Mismatched shapes or otherwise malformed arguments at call time."""


class RngStream:
    """Labeled, seeded random stream.

    The generator is derived from ``(seed, crc32(label))`` so independent
    streams (catalog draws, rating noise, policy draws, ...) never share
    state.  Draws are served from internal buffers refilled in fixed-size
    blocks; identical call sequences therefore yield identical values.
    """

    BLOCK = 2048

    def __init__(self, seed: int, label: str):
        self.seed = int(seed)
        self.label = label
        ss = np.random.SeedSequence(entropy=self.seed & (2**64 - 1),
                                    spawn_key=(zlib.crc32(label.encode()),))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self._u = np.empty(0)
        self._ui = 0
        self._z = np.empty(0)
        self._zi = 0

    def __repr__(self):
        return f"RngStream(seed={self.seed}, label={self.label!r})"

    def uniform(self) -> float:
        """One draw from U[0, 1)."""
        if self._ui >= len(self._u):
            self._u = self._gen.random(self.BLOCK)
            self._ui = 0
        x = self._u[self._ui]
        self._ui += 1
        return float(x)

    def index(self, n: int) -> int:
        """Uniform integer on ``[0, n)`` built from one uniform draw."""
        return min(int(self.uniform() * n), n - 1)

    def gauss(self) -> float:
        """One standard normal draw."""
        if self._zi >= len(self._z):
            self._z = self._gen.standard_normal(self.BLOCK)
            self._zi = 0
        x = self._z[self._zi]
        self._zi += 1
        return float(x)

    def normal(self, size: int) -> np.ndarray:
        """``size`` standard normal draws."""
        out = np.empty(size)
        filled = 0
        while filled < size:
            if self._zi >= len(self._z):
                self._z = self._gen.standard_normal(self.BLOCK)
                self._zi = 0
            take = min(size - filled, len(self._z) - self._zi)
            out[filled:filled + take] = self._z[self._zi:self._zi + take]
            self._zi += take
            filled += take
        return out


def _as_vector(x, d: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ContractError(f"{name} must be one-dimensional, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise ContractError(f"{name} has dimension {v.shape[0]}, expected {d}")
    if not np.all(np.isfinite(v)):
        raise ContractError(f"{name} has non-finite entries")
    return v


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ItemCatalog:
    """Fixed latent item vectors, stored as a read-only ``(n, d)`` array."""

    items: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.items, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ConfigError(f"catalog must be a non-empty (n, d) array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ConfigError("catalog contains non-finite entries")
        object.__setattr__(self, "items", _frozen(a))

    @property
    def n(self) -> int:
        return self.items.shape[0]

    @property
    def d(self) -> int:
        return self.items.shape[1]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.items[i]

    def __len__(self):
        return self.n

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.items, axis=1)))


@dataclass(frozen=True, eq=False)
class PreferenceState:
    """True preference ``pi`` and the fixed hedonic-adaptation baseline."""

    pi: np.ndarray
    baseline: np.ndarray

    def __post_init__(self):
        pi = _as_vector(self.pi, name="pi")
        base = _as_vector(self.baseline, pi.shape[0], name="baseline")
        object.__setattr__(self, "pi", _frozen(pi))
        object.__setattr__(self, "baseline", _frozen(base))

    @property
    def d(self) -> int:
        return self.pi.shape[0]

    def with_pi(self, pi) -> "PreferenceState":
        return PreferenceState(pi, self.baseline)


@dataclass(frozen=True)
class InteractionRecord:
    step: int
    item_index: int
    rating: float
    noiseless_rating: float


@dataclass
class InteractionHistory:
    """Ordered interaction records with contiguous steps starting at 1."""

    records: list[InteractionRecord] = field(default_factory=list)

    def __post_init__(self):
        for k, rec in enumerate(self.records, start=1):
            if rec.step != k:
                raise ContractError(f"history step {rec.step} at position {k}; steps must be 1, 2, ...")

    def append(self, item_index: int, rating: float, noiseless_rating: float) -> InteractionRecord:
        rec = InteractionRecord(len(self.records) + 1, int(item_index), float(rating), float(noiseless_rating))
        self.records.append(rec)
        return rec

    def ratings(self) -> list[float]:
        return [r.rating for r in self.records]

    def __len__(self):
        return len(self.records)


def _check_sampling(d: int, sigma: float, n: int = 1):
    if int(n) != n or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    if int(d) != d or d < 1:
        raise ConfigError(f"d must be a positive integer, got {d!r}")
    if not (math.isfinite(sigma) and sigma > 0):
        raise ConfigError(f"sigma must be finite and > 0, got {sigma!r}")


def sample_catalog(n: int, d: int, sigma: float, rng: RngStream) -> ItemCatalog:
    """Draw ``n`` item vectors with i.i.d. N(0, sigma^2) coordinates."""
    _check_sampling(d, sigma, n)
    return ItemCatalog(sigma * rng.normal(n * d).reshape(n, d))


def sample_initial_preference(d: int, sigma: float, rng: RngStream, baseline=None) -> PreferenceState:
    """Draw the initial preference; the baseline defaults to that draw."""
    _check_sampling(d, sigma)
    pi0 = sigma * rng.normal(d)
    return PreferenceState(pi0, pi0 if baseline is None else baseline)


def rate(pref: PreferenceState | np.ndarray, item, noise_std: float,
         rng: RngStream | None = None) -> tuple[float, float]:
    """Linear rating ``<pi, v>`` plus Gaussian noise.

    Returns ``(observed, noiseless)``.  ``rng`` may be omitted only when
    ``noise_std`` is zero.
    """
    pi = pref.pi if isinstance(pref, PreferenceState) else np.asarray(pref, dtype=float)
    v = np.asarray(item, dtype=float)
    if v.shape != pi.shape:
        raise ContractError(f"item shape {v.shape} does not match preference shape {pi.shape}")
    if noise_std < 0:
        raise ContractError(f"noise_std must be >= 0, got {noise_std}")
    clean = float(pi @ v)
    if noise_std == 0:
        return clean, clean
    return clean + noise_std * rng.gauss(), clean
