"""Command-line front end.

One process, one command. Artifacts land in ``--out`` (default ``.``),
written atomically with stable 9-significant-digit formatting so reruns
are byte-identical. Exit codes: 0 success, 1 any error, 2 an unstable
verdict when ``--expect-stable`` was requested.

Commands::

    swingcert simulate SCENARIO [--network NET] [--mode M] [--step S]
                       [--horizon H] [--out DIR] [--expect-stable]
    swingcert equilibria NETWORK [--reference ID] [--out DIR]
    swingcert certify SCENARIO [--network NET] [--mode M] [--out DIR]
    swingcert eac [--p-ref P] [--k-pre K] [--k-fault K] [--k-post K] [--out DIR]
    swingcert cct SCENARIO [--network NET] [--mode M] --t-lo S --t-hi S
                  [--tol S] [--expect-stable] [--out DIR]
    swingcert sweep SCENARIO [--network NET] --taus LIST [--keep droop|inertia]
                  [--out DIR]

The only environment variable read here is ``SWINGCERT_LOG`` (log
verbosity); kernel backend selection is a package-level switch.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from . import fileio
from .dynamics import IntegratorConfig
from .eac import SmibCase, critical_clearing_angle, eac_curve_dataset, extended_boundary
from .equilibria import solve_equilibrium
from .errors import SwingcertError
from .fileio import atomic_write_text, fmt
from .scenarios import cct_search, run_scenario, tau_sweep

log = logging.getLogger("swingcert")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSTABLE = 2


def _scenario_args(sub):
    sub.add_argument("scenario", help="scenario YAML file")
    sub.add_argument("--network", default=None,
                     help="network YAML (overrides the scenario's 'network' entry)")
    sub.add_argument("--mode", choices=("full", "reduced"), default=None,
                     help="integration mode (overrides the scenario's 'mode')")
    sub.add_argument("--step", type=float, default=None,
                     help="integration step override, seconds")
    sub.add_argument("--horizon", type=float, default=None,
                     help="simulation horizon override, seconds")


def _out_arg(sub):
    sub.add_argument("--out", default=".", help="output directory (default: .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swingcert",
        description="First-swing stability simulation and certification",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="run a fault scenario, write trajectory")
    _scenario_args(sim)
    _out_arg(sim)
    sim.add_argument("--expect-stable", action="store_true",
                     help="exit 2 if the verdict is unstable")

    eq = subs.add_parser("equilibria", help="solve and report the operating point")
    eq.add_argument("network", help="network YAML file")
    eq.add_argument("--reference", default=None,
                    help="reference machine id (default: first machine)")
    _out_arg(eq)

    cert = subs.add_parser("certify", help="run a scenario, write certificate trace")
    _scenario_args(cert)
    _out_arg(cert)

    eacp = subs.add_parser("eac", help="emit the equal-area dataset")
    eacp.add_argument("--p-ref", type=float, default=0.5)
    eacp.add_argument("--k-pre", type=float, default=1.0)
    eacp.add_argument("--k-fault", type=float, default=0.0)
    eacp.add_argument("--k-post", type=float, default=1.0)
    _out_arg(eacp)

    cct = subs.add_parser("cct", help="bisect the critical clearing time")
    _scenario_args(cct)
    cct.add_argument("--t-lo", type=float, required=True, help="surviving clearing time")
    cct.add_argument("--t-hi", type=float, required=True, help="unstable clearing time")
    cct.add_argument("--tol", type=float, default=1e-3, help="bracket width, seconds")
    cct.add_argument("--expect-stable", action="store_true",
                     help="exit 2 if the scenario's own clearing time is unstable")
    _out_arg(cct)

    sweep = subs.add_parser("sweep", help="re-run a scenario over time constants")
    _scenario_args(sweep)
    sweep.add_argument("--taus", required=True,
                       help="comma-separated machine time constants, seconds")
    sweep.add_argument("--keep", choices=("droop", "inertia"), default="inertia",
                       help="parameter held fixed while tau varies (default: inertia)")
    _out_arg(sweep)
    return parser


def _load_scenario(args):
    model = fileio.parse_network_file(args.network) if args.network else None
    model, scenario, mode = fileio.parse_scenario_file(args.scenario, model=model)
    if args.mode:
        mode = args.mode
    if args.horizon is not None:
        scenario = dataclasses.replace(scenario, horizon=args.horizon)
    config = IntegratorConfig()
    if args.step is not None:
        config = dataclasses.replace(config, step_full=args.step, step_reduced=args.step)
    return model, scenario, mode, config


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    model, scenario, mode, config = _load_scenario(args)
    result = run_scenario(model, scenario, mode=mode, config=config)
    out = _outdir(args)
    atomic_write_text(out / "trajectory.csv", fileio.trajectory_csv(result.trajectory))
    atomic_write_text(out / "events.csv", fileio.events_csv(result.trajectory))
    atomic_write_text(out / "verdict.txt",
                      fileio.verdict_report(result.verdict, result.timescale))
    print(f"verdict: {result.verdict.status} ({result.verdict.reason}), "
          f"max excursion {fmt(result.verdict.max_pairwise_excursion)} rad")
    if args.expect_stable and result.verdict.status == "unstable":
        return EXIT_UNSTABLE
    return EXIT_OK


def cmd_equilibria(args) -> int:
    model = fileio.parse_network_file(args.network)
    reference = model.index_of(args.reference) if args.reference else 0
    eq = solve_equilibrium(model, reference=reference)
    report = fileio.equilibrium_report(eq, model)
    atomic_write_text(_outdir(args) / "equilibrium.txt", report)
    print(report, end="")
    return EXIT_OK


def cmd_certify(args) -> int:
    model, scenario, mode, config = _load_scenario(args)
    result = run_scenario(model, scenario, mode=mode, config=config)
    out = _outdir(args)
    atomic_write_text(out / "certificate.csv", fileio.certificate_csv(result.certificate))
    atomic_write_text(out / "verdict.txt",
                      fileio.verdict_report(result.verdict, result.timescale))
    ts = result.timescale
    print(f"verdict: {result.verdict.status}; timescale ratio "
          f"{fmt(ts.ratio) if ts else 'n/a'} "
          f"({'separated' if ts and ts.separated else 'not separated'})")
    return EXIT_OK


def cmd_eac(args) -> int:
    case = SmibCase(p_ref=args.p_ref, k_pre=args.k_pre, k_fault=args.k_fault,
                    k_post=args.k_post)
    curve, markers = eac_curve_dataset(case)
    out = _outdir(args)
    atomic_write_text(out / "eac_curve.csv", fileio.eac_curve_csv(curve))
    atomic_write_text(out / "eac_markers.csv", fileio.eac_markers_csv(markers))
    d_cr = critical_clearing_angle(case)
    boundary = extended_boundary(case.p_ref, case.k_post)
    print(f"critical clearing angle: {fmt(d_cr)} rad; "
          f"inertia-free boundary: {fmt(boundary)} rad")
    return EXIT_OK


def cmd_cct(args) -> int:
    model, scenario, mode, config = _load_scenario(args)
    t_star = cct_search(model, scenario, mode=mode, t_lo=args.t_lo, t_hi=args.t_hi,
                        tol=args.tol, config=config)
    cct_seconds = t_star - scenario.t_fault
    out = _outdir(args)
    atomic_write_text(out / "cct.txt",
                      f"critical_clearing_time_s: {fmt(cct_seconds)}\n"
                      f"clearing_instant_s: {fmt(t_star)}\n")
    print(f"critical clearing time: {fmt(cct_seconds)} s "
          f"(clearing instant {fmt(t_star)} s)")
    if args.expect_stable:
        result = run_scenario(model, scenario, mode=mode, config=config,
                              diagnostics=False)
        if result.verdict.status == "unstable":
            return EXIT_UNSTABLE
    return EXIT_OK


def cmd_sweep(args) -> int:
    model, scenario, mode, config = _load_scenario(args)
    try:
        taus = [float(v) for v in args.taus.split(",") if v.strip()]
    except ValueError:
        raise SwingcertError(f"--taus must be comma-separated numbers, got {args.taus!r}")
    rows = tau_sweep(model, scenario, taus, keep_droop=(args.keep == "droop"),
                     mode=mode, config=config)
    atomic_write_text(_outdir(args) / "sweep.csv", fileio.sweep_csv(rows))
    for row in rows:
        status = row.verdict.status if row.verdict else f"error: {row.error}"
        print(f"tau = {fmt(row.tau)} s -> {status}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "equilibria": cmd_equilibria,
    "certify": cmd_certify,
    "eac": cmd_eac,
    "cct": cmd_cct,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    level = os.environ.get("SWINGCERT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SwingcertError as err:
        print(f"swingcert: error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
