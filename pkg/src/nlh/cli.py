"""Command line entry point: nlh <subcommand> --config <path> [options]."""

from __future__ import annotations

import argparse
import os
import sys


def _set_threads(n: int | None) -> None:
    """Export the BLAS thread count before numpy is imported."""
    n = n if n is not None else os.environ.get("NLH_THREADS")
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlh",
        description="Numerical laboratory for nonlocal evolution equations "
                    "with rough symmetric kernels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    kinds = ("check-kernel", "operator-test", "solve-linear", "solve-nonlinear",
             "calibrate", "track-evolution", "verify-estimates", "verify-all")
    for kind in kinds:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", required=(kind != "verify-all"),
                        help="config JSON path or bundled config name")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--seed", type=int, help="root seed (overrides the config)")
        sp.add_argument("--threads", type=int, help="BLAS thread count (NLH_THREADS fallback)")
        if kind == "verify-all":
            sp.add_argument("--criteria", nargs="*", help="subset of criterion names")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)

    from .harness import ConfigError, ExperimentConfig, load_config, run

    try:
        if args.command == "verify-all" and not args.config:
            import json

            raw = {"kind": "verify-all"}
            if getattr(args, "criteria", None):
                raw["criteria"] = args.criteria
            raw_bytes = json.dumps(raw, sort_keys=True).encode()
            from pathlib import Path

            cfg = ExperimentConfig(kind="verify-all", raw=raw, raw_bytes=raw_bytes,
                                   output_dir=Path(args.out or "nlh-out"),
                                   seed=args.seed or 0)
        else:
            cfg = load_config(args.config, out_override=args.out, seed_override=args.seed)
            if cfg.kind != args.command:
                raise ConfigError(
                    f"config kind {cfg.kind!r} does not match subcommand {args.command!r}")
        manifest = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status = "PASS" if manifest.passed else "FAIL"
    print(f"{status} {manifest.kind} in {manifest.wall_seconds:.1f}s "
          f"-> {cfg.output_dir}/manifest.json")
    return 0 if manifest.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
