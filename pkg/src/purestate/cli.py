"""Command line entry point: simulate, sweep, verify, exponents."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import harness, identify, kernels, qcore
from .harness import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2


def _load(args) -> harness.ExperimentConfig:
    if not args.config:
        raise ConfigError("config: --config PATH is required")
    cfg = harness.load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.strict_budget:
        overrides["strict_budget"] = True
    return replace(cfg, **overrides) if overrides else cfg


def cmd_sweep(args) -> int:
    cfg = _load(args)
    result = harness.run_sweep(cfg)
    if not cfg.output_path:
        sys.stdout.write(result.to_csv())
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    res = harness.simulate(cfg)
    text = res.to_jsonl() if isinstance(res, identify.RunTranscript) else res.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import checks

    seed = args.seed if args.seed is not None else 2025
    ok = True
    for name, passed, detail in checks.run_all(seed):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    print(f"backend: {kernels.BACKEND}")
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_exponents(args) -> int:
    if args.purities:
        zs = [float(x) for x in args.purities.split(",")]
        d = args.d
        budgets = [args.n]
    else:
        cfg = _load(args)
        cell = harness.cells(cfg)[0]
        ens = harness.cell_ensemble(cfg, cell)
        zs, d, budgets = list(ens.purities), cell.d, list(cfg.budgets)
    if d is None or d < 2:
        raise ConfigError("d: --d must be given and >= 2 with --purities")
    gp = qcore.gap_profile_from_purities(zs)
    out = {"purities": zs, "d": d, "gap_profile": asdict(gp),
           "bounds": [asdict(identify.exponents_from_purities(zs, d, n)) for n in budgets]}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="purestate", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value experiment file")
        sp.add_argument("--seed", type=int, help="override master_seed")
        sp.add_argument("--out", help="override output path")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--strict-budget", action="store_true",
                        help="clamp phases instead of overshooting N")
        sp.add_argument("-v", "--verbose", action="store_true")

    for name, fn, hlp in (
        ("simulate", cmd_simulate, "one trial of the configured experiment"),
        ("sweep", cmd_sweep, "full (d, N) grid to CSV"),
        ("verify", cmd_verify, "invariant and oracle checks"),
        ("exponents", cmd_exponents, "gap profile and bound exponents"),
    ):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        sp.set_defaults(func=fn)
        if name == "exponents":
            sp.add_argument("--purities", help="comma-separated purities instead of --config")
            sp.add_argument("--d", type=int)
            sp.add_argument("--n", type=int, default=1000)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
