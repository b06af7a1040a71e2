"""Manifest execution and CSV emission."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from functools import partial
from importlib import resources
from pathlib import Path

import numpy as np

from .engine import SweepRow, TrajectoryLog, run_sweep
from .manifest import ExperimentManifest, manifest_to_dict, parse_manifest, serialize_manifest
from .metrics import consumption_entropy, engagement, summarize

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ("mean_engagement", "mean_noiseless_engagement", "consumption_entropy", "mean_magnitude",
                  "final_pi_norm", "osc_peak_count", "osc_median_period", "osc_amplitude")
PLOT_COLUMNS = ("panel", "t", "series", "value")


def fmt(x) -> str:
    """17 significant digits: lossless float round trip."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


def trajectory_columns(d: int) -> list[str]:
    return (["t", "item_index", "rating", "noiseless_rating"]
            + [f"pi_{k}" for k in range(d)] + [f"u_{k}" for k in range(d)] + ["pi_norm"])


def _echo(cfg_dict: dict) -> str:
    return json.dumps(cfg_dict, sort_keys=True, separators=(",", ":"))


def write_trajectory(path: Path, tlog: TrajectoryLog):
    d = tlog.config.d
    norms = tlog.pi_norm
    with open(path, "w", newline="") as fh:
        fh.write(f"# config: {_echo(tlog.config.to_dict())}\n")
        fh.write(",".join(trajectory_columns(d)) + "\n")
        for t in range(tlog.steps + 1):
            if t == 0:
                head = ["0", "", "", ""]
            else:
                head = [str(t), str(int(tlog.items[t - 1])), fmt(tlog.ratings[t - 1]), fmt(tlog.noiseless[t - 1])]
            row = head + [fmt(x) for x in tlog.pi[t]] + [fmt(x) for x in tlog.u[t]] + [fmt(norms[t])]
            fh.write(",".join(row) + "\n")


def plot_rows(tlog: TrajectoryLog, window: int, stride: int):
    """Long-format (panel, t, series, value) rows for one run."""
    T = tlog.steps
    keep = range(0, T + 1, stride)
    pi_norm, u_norm = tlog.pi_norm, tlog.u_norm
    for t in keep:
        yield "magnitude", t, "pi_norm", pi_norm[t]
        yield "magnitude", t, "u_norm", u_norm[t]
        for k in range(tlog.config.d):
            yield "trajectory", t, f"pi_{k}", tlog.pi[t, k]
    if T == 0:
        return
    scores = np.abs(tlog.selected_scores())
    for t in range(1, T + 1, stride):
        yield "score_magnitude", t, "abs_selected_score", scores[t - 1]
    w = min(window, T)
    eng, _ = engagement(tlog, w)
    for j in range(0, len(eng), stride):
        yield "engagement", j + w, "observed", eng[j]
    ent, _ = consumption_entropy(tlog, w)
    for j, h in enumerate(ent):
        yield "entropy", (j + 1) * w, "windowed", h


@dataclass
class RunWriter:
    """Per-run file sink handed to run_sweep; picklable for worker processes."""

    out_dir: str
    name: str
    outputs: tuple
    window: int
    stride: int

    def stem(self, config_id: int, seed: int) -> str:
        return f"{self.name}_c{config_id:03d}_s{seed}"

    def __call__(self, config_id: int, seed: int, tlog: TrajectoryLog):
        out = Path(self.out_dir)
        if "trajectory" in self.outputs:
            write_trajectory(out / "trajectories" / f"{self.stem(config_id, seed)}.csv", tlog)
        if "plot_data" in self.outputs:
            with open(out / "plot_data" / f"{self.stem(config_id, seed)}.csv", "w", newline="") as fh:
                fh.write(f"# config: {_echo(tlog.config.to_dict())}\n")
                fh.write(",".join(PLOT_COLUMNS) + "\n")
                for panel, t, series, val in plot_rows(tlog, self.window, self.stride):
                    fh.write(f"{panel},{t},{series},{fmt(val)}\n")


@dataclass
class ExperimentResult:
    manifest: ExperimentManifest
    rows: list[SweepRow]
    labels: list[str]
    out_dir: Path

    @property
    def failures(self) -> list[SweepRow]:
        return [r for r in self.rows if not r.ok]

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


def write_summary(path: Path, man: ExperimentManifest, rows: list[SweepRow], labels: list[str]):
    with open(path, "w", newline="") as fh:
        fh.write(f"# manifest: {_echo(manifest_to_dict(man))}\n")
        fh.write(",".join(("config_id", "label", "seed", "status", "error") + SUMMARY_FIELDS) + "\n")
        for r in rows:
            label = '"' + labels[r.config_id].replace('"', '""') + '"'
            if r.ok:
                vals = [fmt(r.summary[k]) for k in SUMMARY_FIELDS]
                fh.write(",".join([str(r.config_id), label, str(r.seed), "ok", ""] + vals) + "\n")
            else:
                err = '"' + r.error.replace('"', '""') + '"'
                fh.write(",".join([str(r.config_id), label, str(r.seed), "failed", err]
                                  + [""] * len(SUMMARY_FIELDS)) + "\n")


def run_experiment(man: ExperimentManifest, out_dir, parallelism: int = 1) -> ExperimentResult:
    """Run every config x seed of a manifest and write its files under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for kind in ("trajectory", "plot_data"):
        if kind in man.outputs:
            (out / ("trajectories" if kind == "trajectory" else "plot_data")).mkdir(exist_ok=True)
    (out / f"{man.name}_manifest.yaml").write_text(serialize_manifest(man))

    grid = man.grid()
    labels = [label for label, _ in grid]
    writer = RunWriter(str(out), man.name, man.outputs, man.entropy_window, man.plot_stride)
    rows = run_sweep([cfg for _, cfg in grid], list(man.seeds), parallelism,
                     summarize=partial(summarize, window=man.entropy_window, prominence=man.prominence),
                     sink=writer)
    if "summary" in man.outputs:
        write_summary(out / f"{man.name}_summary.csv", man, rows, labels)
    for r in rows:
        if not r.ok:
            log.error("run failed: config %d (%s) seed %d: %s", r.config_id, labels[r.config_id], r.seed, r.error)
    return ExperimentResult(man, rows, labels, out)


def with_overrides(man: ExperimentManifest, seed: int | None = None, steps: int | None = None) -> ExperimentManifest:
    if seed is not None:
        man = replace(man, seeds=(seed,))
    if steps is not None:
        man = replace(man, base=replace(man.base, steps=steps))
    return man


def list_presets() -> list[str]:
    root = resources.files("prefloop") / "experiments"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_text(name: str) -> str:
    if name not in list_presets():
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return (resources.files("prefloop") / "experiments" / f"{name}.yaml").read_text()


def load_preset(name: str) -> ExperimentManifest:
    return parse_manifest(preset_text(name))
