"""Command line front end: ``ivr-bench {run,sweep,snapshots,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigurationError, IVRError
from .cases import (
    BenchmarkProblem,
    CaseConfig,
    compute_errors,
    prepare_offline,
    run_case,
    save_offline_bases,
)
from .io import (
    load_config,
    read_field_dump,
    report_row,
    write_field_dump,
    write_reports_csv,
)
from .sweep import sweep_basis

__all__ = ["build_parser", "main"]

_CASE_FIELDS = (
    "variant", "coupling", "nx", "ny", "dt", "final_time", "sample_dt", "integrator",
    "truncation_left", "truncation_right", "truncation_global", "output_dir", "basis_dir",
)


def _add_case_options(p: argparse.ArgumentParser):
    p.add_argument("--config", help="case file ([case] section); flags override its values")
    p.add_argument("--variant", choices=("pure_advection", "high_peclet"))
    p.add_argument("--coupling", choices=("global_fem", "global_rom", "fem_fem", "rom_fem", "rom_rom"))
    p.add_argument("--nx", type=int, help="global element count in x (even)")
    p.add_argument("--ny", type=int)
    p.add_argument("--dt", type=float, help="requested time step (aligned down to the snapshot spacing)")
    p.add_argument("--final-time", type=float)
    p.add_argument("--sample-dt", type=float, help="snapshot spacing")
    p.add_argument("--integrator", choices=("rk4", "forward_euler"))
    p.add_argument("--truncation", help="policy for every ROM side, e.g. energy:0.99999, threshold:1e-6, fixed:80")
    p.add_argument("--truncation-left")
    p.add_argument("--truncation-right")
    p.add_argument("--truncation-global")
    p.add_argument("--output-dir")
    p.add_argument("--basis-dir", help="directory of saved bases (from the snapshots subcommand)")


def _case_config(args) -> CaseConfig:
    overrides = {name: getattr(args, name, None) for name in _CASE_FIELDS}
    if args.truncation:
        for side in ("truncation_left", "truncation_right", "truncation_global"):
            overrides[side] = overrides[side] or args.truncation
    if args.config:
        return load_config(args.config, **overrides)
    return CaseConfig(**{k: v for k, v in overrides.items() if v is not None})


def _print_row(row: dict, out):
    print(", ".join(f"{k}={v}" for k, v in row.items()), file=out)


def _cmd_run(args, out):
    config = _case_config(args)
    report, _ = run_case(config)
    row = report_row(report)
    _print_row(row, out)
    if report.interface_mismatch is not None:
        print(f"interface_mismatch={report.interface_mismatch:.3e}", file=out)
    csv_path = args.csv or (Path(config.output_dir) / "report.csv" if config.output_dir else None)
    if csv_path:
        write_reports_csv(csv_path, [report])
    return 0


def _cmd_sweep(args, out):
    config = _case_config(args)
    sizes = [int(v) for v in args.modes.split(",") if v.strip()]
    window = tuple(float(v) for v in args.window.split(",")) if args.window else None
    result = sweep_basis(config, sizes, window=window)
    for report in result.reports:
        _print_row(report_row(report), out)
    print(f"slope={result.slope}", file=out)
    csv_path = args.csv or (Path(config.output_dir) / "sweep.csv" if config.output_dir else None)
    if csv_path:
        write_reports_csv(csv_path, result.reports)
    return 0


def _cmd_snapshots(args, out):
    config = _case_config(args)
    if not config.basis_dir:
        raise ConfigurationError("snapshots needs --basis-dir")
    problem = BenchmarkProblem(config)
    offline = prepare_offline(problem)
    for path in save_offline_bases(offline, config.basis_dir):
        print(f"wrote {path}", file=out)
    dump_dir = Path(config.output_dir or config.basis_dir)
    dump_dir.mkdir(parents=True, exist_ok=True)
    for name, values, t in (
        ("reference_t0.txt", offline.reference_initial, 0.0),
        ("reference_tfinal.txt", offline.reference_final, config.final_time),
    ):
        write_field_dump(dump_dir / name, values, config.nx, config.ny, t, config.variant)
    print(f"snapshot_seconds={offline.snapshot_seconds:.3f}", file=out)
    return 0


def _cmd_report(args, out):
    cand = read_field_dump(args.candidate)
    ref = read_field_dump(args.reference)
    init = read_field_dump(args.initial).values if args.initial else None
    eps, eps0 = compute_errors(cand.values, ref.values, init)
    print(f"eps={eps!r}", file=out)
    if eps0 is not None:
        print(f"eps0={eps0!r}", file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ivr-bench", description="Solid body rotation benchmark for IVR coupling")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single case")
    _add_case_options(p)
    p.add_argument("--csv", help="write the report row to this file")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="basis-size sweep")
    _add_case_options(p)
    p.add_argument("--modes", required=True, help="comma separated basis sizes")
    p.add_argument("--window", help="n_min,n_max for the convergence slope fit")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("snapshots", help="offline stage only: reference run and POD bases")
    _add_case_options(p)
    p.set_defaults(func=_cmd_snapshots)

    p = sub.add_parser("report", help="recompute errors from field dumps")
    p.add_argument("candidate")
    p.add_argument("reference")
    p.add_argument("--initial", help="t=0 dump for the rotation error")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args, out)
    except (IVRError, OSError) as exc:
        print(f"ivr-bench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
