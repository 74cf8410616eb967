"""Command line entry point: ``roughevo <kind> --config cfg.json --out dir``."""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import KINDS, ExperimentConfig, emit_report, run_experiment
from .paths import ConfigError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughevo", description=__doc__)
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the driver seed")
    p.add_argument("--level", type=int, default=None, help="override the dyadic grid level")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            data = json.load(fh)
        data["kind"] = args.kind
        overrides = {k: v for k, v in (("seed", args.seed), ("level", args.level)) if v is not None}
        if overrides:
            data["path"] = {**data.get("path", {}), **overrides}
        cfg = ExperimentConfig.from_dict(data)
    except (OSError, ValueError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    criteria, details = run_experiment(cfg)
    ok = emit_report(args.out, criteria, details, cfg)
    for c in criteria:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={c.value!r} threshold={c.threshold!r}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
