"""Command-line entry point: ``prefloop run|preset|list-presets|validate``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .core import ConfigError
from .experiment import list_presets, preset_text, run_experiment, with_overrides
from .manifest import manifest_to_dict, parse_manifest, serialize_manifest

OUT_DIR_ENV = "PREFLOOP_OUT_DIR"
EXIT_OK, EXIT_RUN_FAILED, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prefloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--seed", type=int, help="run this single seed instead of the manifest's seeds")
        p.add_argument("--steps", type=int, help="override the number of steps")
        p.add_argument("--out-dir", default=None,
                       help=f"output directory (default: ${OUT_DIR_ENV} or ./prefloop-out)")
        p.add_argument("--parallelism", type=int, default=1, help="worker processes")

    p = sub.add_parser("run", help="run a manifest file")
    p.add_argument("manifest", type=Path)
    run_flags(p)
    p = sub.add_parser("preset", help="run a bundled preset")
    p.add_argument("name")
    run_flags(p)
    sub.add_parser("list-presets", help="list bundled presets")
    p = sub.add_parser("validate", help="validate a manifest and print it with defaults filled")
    p.add_argument("manifest", type=Path)
    return parser


def _execute(text: str, args) -> int:
    man = with_overrides(parse_manifest(text), seed=args.seed, steps=args.steps)
    out_dir = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "prefloop-out")
    print(f"seeds: {list(man.seeds)}")
    print(f"config: {json.dumps(manifest_to_dict(man), sort_keys=True)}")
    result = run_experiment(man, out_dir, parallelism=args.parallelism)
    ok = len(result.rows) - len(result.failures)
    print(f"{ok}/{len(result.rows)} runs succeeded; output in {out_dir}")
    for r in result.failures:
        print(f"FAILED config {r.config_id} ({result.labels[r.config_id]}) seed {r.seed}: {r.error}",
              file=sys.stderr)
    return result.exit_code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            for name in list_presets():
                print(name)
            return EXIT_OK
        if args.command == "validate":
            man = parse_manifest(args.manifest.read_text())
            sys.stdout.write(serialize_manifest(man))
            print(f"# ok: {man.n_cells()} runs", file=sys.stderr)
            return EXIT_OK
        if args.command == "run":
            return _execute(args.manifest.read_text(), args)
        return _execute(preset_text(args.name), args)
    except (ConfigError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
