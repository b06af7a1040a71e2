"""Closed-loop simulation: score, select, rate, estimate, update preference."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import (ConfigError, ItemCatalog, PreferenceState, RngStream, sample_catalog,
                   sample_initial_preference)
from .dynamics import DiscountedBaseline, DynamicsConfig, mixing_weights, surprise
from .estimate import EstimatorState, ogd_step
from .recommend import (PolicyConfig, select_greedy, select_persistent_softmax, select_softmax,
                        select_uniform)


class SimulationError(RuntimeError):
    """A run produced non-finite state."""


@dataclass(frozen=True)
class EstimatorConfig:
    alpha: float = 0.05
    eta: float = 0.01
    # score with the true preference instead of an estimate
    oracle: bool = False
    # start the estimate at pi_0 instead of a random draw
    init_from_truth: bool = False

    def __post_init__(self):
        # reuse EstimatorState validation for alpha/eta
        EstimatorState(np.zeros(1), self.alpha, self.eta)


@dataclass(frozen=True)
class SimulationConfig:
    n: int = 1000
    d: int = 2
    sigma: float = 1.0
    steps: int = 1000
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    rating_noise_std: float = 0.05
    seed: int = 0
    # hedonic-adaptation target; None means pi_0
    baseline: tuple[float, ...] | None = None

    def __post_init__(self):
        if isinstance(self.steps, bool) or int(self.steps) != self.steps or self.steps < 0:
            raise ConfigError(f"steps must be a non-negative integer, got {self.steps!r}")
        for name in ("n", "d"):
            val = getattr(self, name)
            if isinstance(val, bool) or int(val) != val or val < 1:
                raise ConfigError(f"{name} must be a positive integer, got {val!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigError(f"sigma must be finite and > 0, got {self.sigma!r}")
        if not (math.isfinite(self.rating_noise_std) and self.rating_noise_std >= 0):
            raise ConfigError(f"rating_noise_std must be >= 0, got {self.rating_noise_std!r}")
        if self.baseline is not None:
            if len(self.baseline) != self.d:
                raise ConfigError(f"baseline has {len(self.baseline)} entries, expected d={self.d}")
            object.__setattr__(self, "baseline", tuple(float(x) for x in self.baseline))
        self.policy.validate_for(self.n)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["baseline"] = None if self.baseline is None else list(self.baseline)
        return out


@dataclass(eq=False)
class TrajectoryLog:
    """Per-step record of one run.

    ``pi`` and ``u`` hold ``steps + 1`` snapshots (row 0 is the initial
    state); ``items``, ``ratings`` and ``noiseless`` hold one entry per
    interaction.  In oracle mode ``u`` is the scoring vector, i.e. ``pi``.
    """

    config: SimulationConfig
    catalog: ItemCatalog
    baseline: np.ndarray
    pi: np.ndarray
    u: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    noiseless: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.items)

    @property
    def pi_norm(self) -> np.ndarray:
        return np.linalg.norm(self.pi, axis=1)

    @property
    def u_norm(self) -> np.ndarray:
        return np.linalg.norm(self.u, axis=1)

    def selected_scores(self) -> np.ndarray:
        """Predicted score of the item picked at each step."""
        return np.einsum("ij,ij->i", self.u[:-1], self.catalog.items[self.items])


def _initial_state(cfg: SimulationConfig):
    catalog = sample_catalog(cfg.n, cfg.d, cfg.sigma, RngStream(cfg.seed, "catalog"))
    pref = sample_initial_preference(cfg.d, cfg.sigma, RngStream(cfg.seed, "preference"),
                                     baseline=cfg.baseline)
    if cfg.estimator.init_from_truth:
        u0 = pref.pi.copy()
    else:
        u0 = cfg.sigma * RngStream(cfg.seed, "estimate").normal(cfg.d)
    return catalog, pref, u0


# divergence is reported as SimulationError; numpy warnings would only duplicate it
@np.errstate(over="ignore", invalid="ignore")
def run_simulation(cfg: SimulationConfig) -> TrajectoryLog:
    catalog, pref, u0 = _initial_state(cfg)
    T, d = cfg.steps, cfg.d
    dyn, pol, est = cfg.dynamics, cfg.policy, cfg.estimator
    V = catalog.items
    policy_rng = RngStream(cfg.seed, "policy")
    rating_rng = RngStream(cfg.seed, "rating-noise")
    pref_rng = RngStream(cfg.seed, "pref-noise")

    pi_log = np.empty((T + 1, d))
    u_log = np.empty((T + 1, d))
    items = np.empty(T, dtype=np.int64)
    ratings = np.empty(T)
    clean = np.empty(T)

    pi = pref.pi.copy()
    base_pref = pref.baseline
    u = u0
    prev = None
    prev_norm = None
    pi_log[0] = pi
    u_log[0] = pi if est.oracle else u
    tracker = DiscountedBaseline(dyn.discount_delta)
    fixed_mix = mixing_weights(0.0, dyn)
    kind = pol.kind
    noise_r = cfg.rating_noise_std
    noise_p = dyn.pref_noise_std

    for t in range(1, T + 1):
        w = pi if est.oracle else u
        if kind == "uniform":
            i = select_uniform(cfg.n, policy_rng)
        elif kind == "constant":
            i = pol.constant_index
        else:
            scores = V @ w
            if kind == "greedy":
                i = select_greedy(scores, policy_rng)
            else:
                w_norm = math.sqrt(float(w @ w))
                if kind == "softmax":
                    i = select_softmax(scores, pol.beta, w_norm, policy_rng)
                else:
                    i = select_persistent_softmax(scores, pol.beta, w, prev, catalog, policy_rng,
                                                  norm_scaling=pol.persistent_norm_scaling,
                                                  momentum=pol.momentum, norms=(w_norm, prev_norm))
                    prev_norm = w_norm
        v = V[i]
        r_clean = float(pi @ v)
        r = r_clean + noise_r * rating_rng.gauss() if noise_r else r_clean

        prev = w
        if not est.oracle:
            u = ogd_step(u, v, r, float(u @ v), est.alpha, est.eta)

        if dyn.gamma_oc:
            keep, to_item, to_base = mixing_weights(surprise(tracker.value, r, dyn), dyn)
        else:
            keep, to_item, to_base = fixed_mix
        pi = keep * pi + to_item * v
        if to_base:
            pi += to_base * base_pref
        if noise_p:
            pi = pi + noise_p * pref_rng.normal(d)
        tracker.push(r)

        # one scalar covers nan/inf in r, pi and u
        if not math.isfinite(r + float(pi @ pi) + float(u @ u)):
            raise SimulationError(f"non-finite state at step {t} (seed {cfg.seed}): "
                                  f"rating={r}, |pi|={np.linalg.norm(pi)}, |u|={np.linalg.norm(u)}")
        items[t - 1] = i
        ratings[t - 1] = r
        clean[t - 1] = r_clean
        pi_log[t] = pi
        u_log[t] = pi if est.oracle else u

    return TrajectoryLog(cfg, catalog, base_pref, pi_log, u_log, items, ratings, clean)


@dataclass
class SweepRow:
    config_id: int
    seed: int
    summary: dict | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _sweep_cell(args):
    config_id, cfg, seed, summarize, sink = args
    try:
        log = run_simulation(replace(cfg, seed=seed))
        if sink is not None:
            sink(config_id, seed, log)
        return SweepRow(config_id, seed, summarize(log))
    except Exception as exc:  # recorded per cell, sweep continues
        return SweepRow(config_id, seed, None, f"{type(exc).__name__}: {exc}")


def run_sweep(grid: list[SimulationConfig], seeds: list[int], parallelism: int = 1,
              summarize=None, sink=None) -> list[SweepRow]:
    """Run every (config, seed) pair; rows come back ordered by (config id, seed position).

    ``summarize`` maps a TrajectoryLog to a dict and defaults to
    :func:`prefloop.metrics.summarize`.  ``sink(config_id, seed, log)``, if
    given, sees every log before it is discarded.  Both must be picklable
    when ``parallelism > 1``.
    """
    if not grid:
        raise ConfigError("sweep grid is empty")
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    if summarize is None:
        from .metrics import summarize
    cells = [(k, cfg, s, summarize, sink) for k, cfg in enumerate(grid) for s in seeds]
    if parallelism <= 1:
        return [_sweep_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_sweep_cell, cells, chunksize=max(1, len(cells) // (4 * parallelism))))
