"""Experiment manifests: YAML documents describing a base config, sweep axes and seeds.

Schema (every key optional except as noted; unknown keys are rejected)::

    name: fig3                  # output file prefix
    seeds: [0, 1, 2]            # default [0]
    outputs: [trajectory, summary, plot_data]
    max_cells: 10000            # cap on configs x seeds
    entropy_window: 500
    prominence: 0.5
    plot_stride: 10             # keep every k-th step in plot data

    n: 1000                     # SimulationConfig fields, flat
    d: 2
    sigma: 1.0
    steps: 5000
    rating_noise_std: 0.05
    baseline: null              # list of d floats; null means pi_0
    dynamics: {gamma_me: 0.1, gamma_oc: 0, gamma_ha: 0, discount_delta: 0.9,
               pref_noise_std: 0.01, surprise_sign: narrative,
               surprise_scale: scaled_arctan}
    policy: softmax             # or a mapping with kind, beta, constant_index,
                                # persistent_norm_scaling, momentum
    estimator: {alpha: 0.05, eta: 0.01, oracle: false, init_from_truth: false}

    sweep:                      # dotted config paths -> value lists
      policy.beta: [1, 2, 3]
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, fields, replace

import yaml

from .core import ConfigError
from .dynamics import DynamicsConfig
from .engine import EstimatorConfig, SimulationConfig
from .recommend import PolicyConfig

OUTPUT_KINDS = ("trajectory", "summary", "plot_data")
SECTIONS = {"dynamics": DynamicsConfig, "policy": PolicyConfig, "estimator": EstimatorConfig}
SIM_KEYS = ("n", "d", "sigma", "steps", "rating_noise_std", "baseline")
MANIFEST_KEYS = ("name", "seeds", "outputs", "max_cells", "entropy_window", "prominence",
                 "plot_stride", "sweep")


class ManifestError(ConfigError):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}: " if path else ""
        at = f" (line {line})" if line is not None else ""
        super().__init__(f"{where}{message}{at}")


@dataclass(frozen=True)
class ExperimentManifest:
    name: str = "experiment"
    base: SimulationConfig = field(default_factory=SimulationConfig)
    sweep: dict = field(default_factory=dict)
    seeds: tuple[int, ...] = (0,)
    outputs: tuple[str, ...] = OUTPUT_KINDS
    max_cells: int = 10000
    entropy_window: int = 500
    prominence: float = 0.5
    plot_stride: int = 10

    def grid(self) -> list[tuple[str, SimulationConfig]]:
        """Cross product of sweep axes applied to the base config, in axis order."""
        if not self.sweep:
            return [("base", self.base)]
        axes = list(self.sweep.items())
        out = []
        for combo in itertools.product(*(vals for _, vals in axes)):
            cfg = self.base
            for (path, _), val in zip(axes, combo):
                cfg = set_path(cfg, path, val)
            label = ",".join(f"{p}={_label(v)}" for (p, _), v in zip(axes, combo))
            out.append((label, cfg))
        return out

    def n_cells(self) -> int:
        k = 1
        for vals in self.sweep.values():
            k *= len(vals)
        return k * len(self.seeds)


def _label(v) -> str:
    if isinstance(v, dict):
        return "{" + ";".join(f"{k}={x}" for k, x in v.items()) + "}"
    return str(v)


def set_path(cfg: SimulationConfig, path: str, value) -> SimulationConfig:
    """Replace one field of ``cfg``; a bare section name replaces or merges the whole section."""
    head, _, rest = path.partition(".")
    if not rest and head in SECTIONS:
        if isinstance(value, dict):
            value = replace(getattr(cfg, head), **value)
        return replace(cfg, **{head: value})
    if rest:
        section = getattr(cfg, head)
        return replace(cfg, **{head: replace(section, **{rest: value})})
    if head == "baseline" and value is not None:
        value = tuple(value)
    return replace(cfg, **{head: value})


def _field_names(cls) -> list[str]:
    return [f.name for f in fields(cls)]


def _valid_paths() -> set[str]:
    paths = set(SIM_KEYS) | set(SECTIONS)
    for sec, cls in SECTIONS.items():
        paths.update(f"{sec}.{k}" for k in _field_names(cls))
    return paths


def _to_python(node, path: str, lines: dict):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for knode, vnode in node.value:
            key = knode.value
            sub = f"{path}.{key}" if path else key
            if key in out:
                raise ManifestError("duplicate key", sub, knode.start_mark.line + 1)
            lines[sub] = knode.start_mark.line + 1
            out[key] = _to_python(vnode, sub, lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, f"{path}[{k}]", lines) for k, v in enumerate(node.value)]
    return _scalar(node)


# YAML 1.2 float syntax; PyYAML's 1.1 resolver leaves "1e-3" and "1.0e100" as strings
_FLOAT_12 = re.compile(r"[-+]?(\.[0-9]+|[0-9]+(\.[0-9]*)?)([eE][-+]?[0-9]+)?")


def _scalar(node):
    if node.style is None and node.tag == "tag:yaml.org,2002:str" and _FLOAT_12.fullmatch(node.value):
        return float(node.value)
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node)
    finally:
        loader.dispose()


def _check_type(value, kind, path, lines):
    ok = {
        "int": isinstance(value, int) and not isinstance(value, bool),
        "float": isinstance(value, (int, float)) and not isinstance(value, bool),
        "bool": isinstance(value, bool),
        "str": isinstance(value, str),
    }[kind]
    if not ok:
        raise ManifestError(f"expected {kind}, got {type(value).__name__} {value!r}", path, lines.get(path))
    return float(value) if kind == "float" else value


def _field_kind(cls, name) -> str:
    default = next(f for f in fields(cls) if f.name == name).default
    return {bool: "bool", int: "int", float: "float", str: "str"}[type(default)]


SIM_KINDS = {"n": "int", "d": "int", "sigma": "float", "steps": "int", "rating_noise_std": "float"}


def _coerce(path: str, value, lines: dict):
    """Type-check one value addressed by a dotted config path.

    A bare section name takes a partial mapping (or, for ``policy``, a kind
    string) that is merged onto the base section when the grid is built.
    """
    if path in SECTIONS:
        if path == "policy" and isinstance(value, str):
            value = {"kind": value}
        if not isinstance(value, dict):
            raise ManifestError("expected a mapping", path, lines.get(path))
        names = _field_names(SECTIONS[path])
        for key in value:
            if key not in names:
                raise ManifestError(f"unknown key {key!r} (allowed: {', '.join(names)})",
                                    f"{path}.{key}", lines.get(path))
        return {k: _coerce(f"{path}.{k}", v, {f"{path}.{k}": lines.get(path)}) for k, v in value.items()}
    if path == "baseline":
        if value is None:
            return None
        if not isinstance(value, list):
            raise ManifestError("expected a list of floats or null", path, lines.get(path))
        return tuple(_check_type(x, "float", f"{path}[{k}]", lines) for k, x in enumerate(value))
    if path in SIM_KINDS:
        return _check_type(value, SIM_KINDS[path], path, lines)
    sec, _, key = path.partition(".")
    return _check_type(value, _field_kind(SECTIONS[sec], key), path, lines)


def _build_section(sec: str, raw, lines: dict):
    cls = SECTIONS[sec]
    if sec == "policy" and isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        raise ManifestError("expected a mapping", sec, lines.get(sec))
    names = _field_names(cls)
    kwargs = {}
    for key, val in raw.items():
        path = f"{sec}.{key}"
        if key not in names:
            raise ManifestError(f"unknown key {key!r} (allowed: {', '.join(names)})", path, lines.get(path))
        kwargs[key] = _coerce(path, val, lines)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ManifestError(str(exc), sec, lines.get(sec)) from None


def manifest_from_dict(doc: dict, lines: dict | None = None) -> ExperimentManifest:
    lines = lines or {}
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a mapping at top level", "", 1)
    allowed = set(MANIFEST_KEYS) | set(SIM_KEYS) | set(SECTIONS)
    for key in doc:
        if key not in allowed:
            raise ManifestError(f"unknown key {key!r}", key, lines.get(key))

    sim = {k: _coerce(k, doc[k], lines) for k in SIM_KEYS if k in doc}
    for sec in SECTIONS:
        if sec in doc:
            sim[sec] = _build_section(sec, doc[sec], lines)
    try:
        base = SimulationConfig(**sim)
    except ConfigError as exc:
        raise ManifestError(str(exc), "", 1) from None

    kw = {}
    if "name" in doc:
        kw["name"] = _check_type(doc["name"], "str", "name", lines)
    for key in ("max_cells", "entropy_window", "plot_stride"):
        if key in doc:
            kw[key] = _check_type(doc[key], "int", key, lines)
            if kw[key] < 1:
                raise ManifestError("must be >= 1", key, lines.get(key))
    if "prominence" in doc:
        kw["prominence"] = _check_type(doc["prominence"], "float", "prominence", lines)
        if not 0 < kw["prominence"] < 1:
            raise ManifestError("must lie in (0, 1)", "prominence", lines.get("prominence"))
    if "seeds" in doc:
        seeds = doc["seeds"]
        if not isinstance(seeds, list) or not seeds:
            raise ManifestError("expected a non-empty list of integers", "seeds", lines.get("seeds"))
        kw["seeds"] = tuple(_check_type(s, "int", f"seeds[{k}]", lines) for k, s in enumerate(seeds))
    if "outputs" in doc:
        outs = doc["outputs"]
        if not isinstance(outs, list):
            raise ManifestError("expected a list", "outputs", lines.get("outputs"))
        for k, o in enumerate(outs):
            if o not in OUTPUT_KINDS:
                raise ManifestError(f"unknown output {o!r} (allowed: {', '.join(OUTPUT_KINDS)})",
                                    f"outputs[{k}]", lines.get(f"outputs[{k}]"))
        kw["outputs"] = tuple(outs)
    if "sweep" in doc:
        raw = doc["sweep"]
        if not isinstance(raw, dict):
            raise ManifestError("expected a mapping of config paths to value lists", "sweep", lines.get("sweep"))
        valid = _valid_paths()
        sweep = {}
        for path, vals in raw.items():
            where = f"sweep.{path}"
            if path not in valid:
                raise ManifestError(f"unknown config path {path!r}", where, lines.get(where))
            if not isinstance(vals, list) or not vals:
                raise ManifestError("expected a non-empty list", where, lines.get(where))
            sweep[path] = [_coerce(path, v, {path: lines.get(where)}) for v in vals]
        kw["sweep"] = sweep

    man = ExperimentManifest(base=base, **kw)
    _checked_grid(man, lines)
    if man.n_cells() > man.max_cells:
        raise ManifestError(f"{man.n_cells()} runs exceed max_cells={man.max_cells}", "sweep", lines.get("sweep"))
    return man


def _checked_grid(man: ExperimentManifest, lines: dict):
    try:
        return man.grid()
    except ConfigError as exc:
        raise ManifestError(str(exc), "sweep", lines.get("sweep")) from None


def parse_manifest(text: str) -> ExperimentManifest:
    """Parse and validate a manifest document, filling every default."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ManifestError(f"malformed YAML: {getattr(exc, 'problem', exc)}", "",
                            mark.line + 1 if mark else None) from None
    if node is None:
        return ExperimentManifest()
    lines: dict = {}
    return manifest_from_dict(_to_python(node, "", lines), lines)


def manifest_to_dict(man: ExperimentManifest) -> dict:
    base = man.base.to_dict()
    base.pop("seed")
    return {
        "name": man.name,
        "seeds": list(man.seeds),
        "outputs": list(man.outputs),
        "max_cells": man.max_cells,
        "entropy_window": man.entropy_window,
        "prominence": man.prominence,
        "plot_stride": man.plot_stride,
        **base,
        "sweep": {k: [list(x) if isinstance(x, tuple) else x for x in v] for k, v in man.sweep.items()},
    }


def serialize_manifest(man: ExperimentManifest) -> str:
    return yaml.safe_dump(manifest_to_dict(man), sort_keys=False, default_flow_style=None)
