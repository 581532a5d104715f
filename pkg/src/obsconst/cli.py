"""``obsconst`` command line: basis listings, observability reports and validation suites.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import config as cfg
from . import report, validation
from .analysis import sweep
from .spectral import CACHE_ENV, EmptyBasisError, build_basis

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


def _load(args) -> cfg.RunConfig:
    if args.config:
        run = cfg.load(args.config)
    else:
        run = cfg.from_dict({"preset": args.preset} if args.preset else {})
    if getattr(args, "cutoff", None) is not None:
        run = cfg.from_dict({**run.to_dict(), "spectral": {"cutoff": args.cutoff, "quadrature": run.to_dict()["spectral"]["quadrature"]}})
    return run


def cmd_basis(args) -> int:
    run = _load(args)
    basis = build_basis(run.manifold, run.cutoff)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("index", "frequency", "descriptor", "eigenspace"))
    for k, space in enumerate(basis.eigenspaces, start=1):
        for pos in space:
            m = basis.modes[pos]
            w.writerow((m.index, repr(m.frequency), ":".join(str(d) for d in m.descriptor), k))
    return EXIT_OK


def _cache_dir(args, run: cfg.RunConfig, out_dir: Path) -> Path:
    if args.cache_dir:
        return Path(args.cache_dir)
    if run.cache_dir:
        return Path(run.cache_dir)
    if os.environ.get(CACHE_ENV):
        return Path(os.environ[CACHE_ENV])
    return out_dir / ".cache"


def cmd_report(args) -> int:
    run = _load(args)
    out_dir = Path(args.out or run.output_dir)
    rep = sweep(
        run.manifold,
        run.region,
        run.cutoff,
        run.times,
        search=run.search,
        seed=run.seed,
        cache_dir=_cache_dir(args, run, out_dir),
        quadrature_order=run.quadrature,
    )
    paths = report.write(rep, out_dir, run.formats)
    (out_dir / "config.yaml").write_text(run.dumps(), encoding="utf-8")
    for p in paths:
        print(p)
    failed = [v.name for v in rep.verdicts if not v.passed]
    if failed:
        print(f"failed verdicts: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK if args.strict else EXIT_OK
    return EXIT_OK


def cmd_validate(args) -> int:
    checks = validation.run(args.suite, seed=args.seed)
    print("suite\tcheck\tstatus\tmeasured\tbound\tdetail")
    for c in checks:
        print(c.line())
    bad = sum(not c.passed for c in checks)
    print(f"# {len(checks) - bad}/{len(checks)} checks passed", file=sys.stderr)
    return EXIT_CHECK if bad else EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(_load(args).dumps())
    return EXIT_OK


def _source(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--config", help="YAML run configuration")
    g.add_argument("--preset", choices=sorted(cfg.PRESETS), help="named preset")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="obsconst", description="Observability constants of the wave equation on model geometries.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="list the truncated eigenbasis")
    _source(p)
    p.add_argument("--cutoff", type=float, help="override the frequency cutoff")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("report", help="sweep the observation times and write the report")
    _source(p)
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--cache-dir", help=f"mass-matrix cache (overrides output.cache_dir and ${CACHE_ENV})")
    p.add_argument("--strict", action="store_true", help="exit 1 when a verdict fails")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="run a validation suite")
    p.add_argument("suite", choices=validation.SUITES + ("all",))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("config", help="print the resolved configuration")
    _source(p)
    p.add_argument("--cutoff", type=float, help="override the frequency cutoff")
    p.set_defaults(func=cmd_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except EmptyBasisError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
