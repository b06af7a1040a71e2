"""Run metrics, oscillation analysis, boundedness check and the max-entropy solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .core import ItemCatalog

DEFAULT_ENTROPY_WINDOW = 500
DEFAULT_PROMINENCE = 0.5


class InfeasibleTarget(ValueError):
    """Requested mean rating cannot be reached by any full-support distribution."""


def _ratings_of(log_or_ratings, noiseless=False) -> np.ndarray:
    if hasattr(log_or_ratings, "ratings"):
        return np.asarray(log_or_ratings.noiseless if noiseless else log_or_ratings.ratings, dtype=float)
    return np.asarray(log_or_ratings, dtype=float)


def engagement(log, window: int | None = None, noiseless: bool = False) -> tuple[np.ndarray, float]:
    """Sliding-window mean rating and the full-run mean.

    ``window=None`` (or any window longer than the run) uses the whole run.
    """
    r = _ratings_of(log, noiseless)
    if r.size == 0:
        raise ValueError("engagement of an empty run is undefined")
    if window is None or window > r.size:
        window = r.size
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    c = np.concatenate(([0.0], np.cumsum(r)))
    series = (c[window:] - c[:-window]) / window
    return series, float(r.mean())


def entropy_of_counts(counts) -> float:
    """Shannon entropy in nats of normalized counts, with 0 ln 0 = 0."""
    c = np.asarray(counts, dtype=float)
    c = c[c > 0]
    if c.size == 0:
        raise ValueError("entropy of an empty window is undefined")
    p = c / c.sum()
    return float(-(p * np.log(p)).sum())


def consumption_entropy(log, window: int | None = DEFAULT_ENTROPY_WINDOW) -> tuple[np.ndarray, float]:
    """Entropy of selection frequencies per consecutive window, plus the whole-run entropy.

    Windows do not overlap; a trailing partial window is dropped unless it
    is the only one.
    """
    items = np.asarray(log.items if hasattr(log, "items") else log, dtype=np.int64)
    if items.size == 0:
        raise ValueError("entropy of an empty run is undefined")
    if window is None or window > items.size:
        window = items.size
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    total = entropy_of_counts(np.bincount(items))
    k = items.size // window
    series = np.array([entropy_of_counts(np.bincount(items[j * window:(j + 1) * window]))
                       for j in range(k)])
    return series, total


def preference_magnitude(log) -> np.ndarray:
    return np.linalg.norm(log.pi, axis=1)


@dataclass
class OscillationReport:
    peak_count: int = 0
    peak_times: list[int] = field(default_factory=list)
    median_period: float = math.nan
    amplitude: float = 0.0


def detect_oscillations(series, prominence_fraction: float = DEFAULT_PROMINENCE) -> OscillationReport:
    """Find peaks whose prominence exceeds a fraction of the series range.

    Prominence is the height of a local maximum above the higher of its two
    flanking minima.  ``median_period`` is the median gap between peaks
    (NaN with fewer than two peaks); ``amplitude`` the median prominence.
    """
    x = np.asarray(series, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 samples")
    if not 0 < prominence_fraction < 1:
        raise ValueError(f"prominence_fraction must lie in (0, 1), got {prominence_fraction}")
    span = float(x.max() - x.min())
    if span == 0:
        return OscillationReport()
    peaks, props = find_peaks(x, prominence=prominence_fraction * span)
    if peaks.size == 0:
        return OscillationReport()
    period = float(np.median(np.diff(peaks))) if peaks.size > 1 else math.nan
    return OscillationReport(int(peaks.size), [int(p) for p in peaks], period,
                             float(np.median(props["prominences"])))


@dataclass
class HullCheck:
    passed: bool
    max_norm: float
    bound: float


def check_convex_hull_bound(log, catalog: ItemCatalog | None = None, tol: float = 1e-9) -> HullCheck:
    """Norm bound implied by ``pi_t`` staying in conv({pi_0, baseline} + V + -V).

    Only meaningful for runs without preference noise and with a surprise
    bounded by 1; other runs raise ValueError.
    """
    cfg = log.config
    if cfg.dynamics.pref_noise_std > 0:
        raise ValueError("boundedness is only claimed for runs without preference noise")
    if cfg.dynamics.gamma_oc > 0 and cfg.dynamics.surprise_scale != "scaled_arctan":
        raise ValueError("boundedness needs the surprise scaled into [-1, 1]")
    catalog = catalog if catalog is not None else log.catalog
    norms = np.linalg.norm(log.pi, axis=1)
    bound = max(float(norms[0]), catalog.max_norm())
    if cfg.dynamics.gamma_ha > 0:
        bound = max(bound, float(np.linalg.norm(log.baseline)))
    peak = float(norms.max())
    return HullCheck(peak <= bound + tol, peak, bound)


def _softmax_mean(r: np.ndarray, beta: float) -> float:
    z = beta * (r - (r.max() if beta >= 0 else r.min()))
    w = np.exp(z)
    return float(w @ r / w.sum())


def max_entropy_distribution(ratings, target: float, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Maximum-entropy distribution over items with mean rating ``target``.

    The maximizer is ``p_i ~ exp(beta * r_i)``; ``beta`` is found by
    bisection on the mean, which is increasing in ``beta``.
    Returns ``(p, beta)``.
    """
    r = np.asarray(ratings, dtype=float)
    if r.ndim != 1 or r.size == 0 or not np.all(np.isfinite(r)):
        raise ValueError("ratings must be a non-empty finite vector")
    lo_r, hi_r = float(r.min()), float(r.max())
    mean0 = float(r.mean())
    if abs(target - mean0) <= 1e-15 * max(1.0, abs(mean0)):
        return np.full(r.size, 1.0 / r.size), 0.0
    if not lo_r < target < hi_r:
        raise InfeasibleTarget(f"target {target} must lie strictly between {lo_r} and {hi_r}")

    lo, hi = -1.0, 1.0
    while _softmax_mean(r, hi) < target:
        lo, hi = hi, 2.0 * hi
    while _softmax_mean(r, lo) > target:
        lo, hi = 2.0 * lo, lo
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _softmax_mean(r, mid) < target:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    z = beta * (r - r.max())
    p = np.exp(z)
    p /= p.sum()
    if abs(float(p @ r) - target) > tol:
        raise ArithmeticError(f"bisection stalled: mean {float(p @ r)} vs target {target}")
    return p, beta


def pareto_compare(points) -> dict:
    """Strict dominance among labelled ``(label, engagement, entropy)`` points.

    Returns ``{"dominated_by": {label: [labels]}, "frontier": [labels]}``
    where a point dominates another if it is larger in both coordinates.
    """
    pts = [(str(lab), float(e), float(h)) for lab, e, h in points]
    if not pts:
        raise ValueError("no points to compare")
    dominated_by = {lab: [o for o, oe, oh in pts if oe > e and oh > h] for lab, e, h in pts}
    frontier = [lab for lab, *_ in pts if not dominated_by[lab]]
    return {"dominated_by": dominated_by, "frontier": frontier}


@dataclass
class MetricSummary:
    mean_engagement: float
    mean_noiseless_engagement: float
    consumption_entropy: float
    mean_magnitude: float
    engagement_series: np.ndarray
    entropy_series: np.ndarray
    magnitude_series: np.ndarray
    oscillation: OscillationReport


def metric_summary(log, window: int = DEFAULT_ENTROPY_WINDOW,
                   prominence: float = DEFAULT_PROMINENCE) -> MetricSummary:
    mags = preference_magnitude(log)
    if log.steps == 0:
        return MetricSummary(math.nan, math.nan, math.nan, float(mags.mean()), np.empty(0), np.empty(0),
                             mags, OscillationReport())
    eng_series, eng = engagement(log, window)
    _, eng_clean = engagement(log, window, noiseless=True)
    ent_series, ent = consumption_entropy(log, window)
    osc = detect_oscillations(mags, prominence) if mags.size >= 3 else OscillationReport()
    return MetricSummary(eng, eng_clean, ent, float(mags.mean()), eng_series, ent_series, mags, osc)


def summarize(log, window: int = DEFAULT_ENTROPY_WINDOW, prominence: float = DEFAULT_PROMINENCE) -> dict:
    """Scalar summary row for one run."""
    m = metric_summary(log, window, prominence)
    return {
        "mean_engagement": m.mean_engagement,
        "mean_noiseless_engagement": m.mean_noiseless_engagement,
        "consumption_entropy": m.consumption_entropy,
        "mean_magnitude": m.mean_magnitude,
        "final_pi_norm": float(m.magnitude_series[-1]),
        "osc_peak_count": m.oscillation.peak_count,
        "osc_median_period": m.oscillation.median_period,
        "osc_amplitude": m.oscillation.amplitude,
    }
