"""Command-line interface.

Exit codes: 0 success, 1 input error (bad files, ids, configuration),
2 numeric failure (non-convergence, inconsistent detections), 3 property
violation from the theorem batch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, acflow, harness
from .caseio import load_case, load_config, to_ac_case, to_dc_network, write_results
from .dcsens import DcSensitivity
from .errors import NumericError
from .interfaces import bipartite_bound, design_bipartite

_DATA = Path(__file__).parent / "data"
DEFAULT_CASE = _DATA / "case118.m"
DEFAULT_CONFIG = _DATA / "case118_experiment.json"


def _add_case(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--case",
        default=str(DEFAULT_CASE),
        help="MATPOWER-format case file (default: bundled 118-bus case)",
    )


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--config",
        default=str(DEFAULT_CONFIG),
        help="experiment config JSON (default: bundled 118-bus partition)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridfence",
        description=(
            "DC/AC power-flow sensitivity factors and boundary interface "
            "networks for containing line-failure impact between sub-grids"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a case file and report its shape")
    _add_case(p)

    p = sub.add_parser("ptdf", help="transfer factor of one line for a bus pair")
    _add_case(p)
    p.add_argument("--line", type=int, required=True, help="branch row id")
    p.add_argument("--source", type=int, required=True, help="injection bus number")
    p.add_argument("--sink", type=int, required=True, help="withdrawal bus number")

    p = sub.add_parser("lodf", help="outage factor of one line for a tripped line")
    _add_case(p)
    p.add_argument("--monitored", type=int, required=True, help="branch row id")
    p.add_argument("--tripped", type=int, required=True, help="branch row id")

    p = sub.add_parser("effsus", help="effective susceptance between two buses")
    _add_case(p)
    p.add_argument("--i", type=int, required=True, help="bus number")
    p.add_argument("--j", type=int, required=True, help="bus number")

    p = sub.add_parser(
        "apply-interface", help="build one configured scenario and summarize it"
    )
    _add_case(p)
    _add_config(p)
    p.add_argument("--scenario", required=True)

    p = sub.add_parser(
        "design-bipartite",
        help="mesh susceptances that decouple two sub-grids",
    )
    p.add_argument("--b1", type=float, required=True, help="side-1 effective susceptance")
    p.add_argument("--b2", type=float, required=True, help="side-2 effective susceptance")
    p.add_argument("--btt", type=float, required=True, help="chosen t-t' susceptance")

    p = sub.add_parser("sweep", help="all-pairs outage factors for one scenario")
    _add_case(p)
    _add_config(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--filter", choices=("cross", "within", "all"), default="cross")
    p.add_argument("--model", choices=("dc", "ac"), default="dc")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("experiment", help="run every configured scenario and model")
    _add_case(p)
    _add_config(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--model", choices=("dc", "ac", "both"), default="dc")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--clip-floor", type=float, default=None)
    p.add_argument(
        "--dominance",
        default="bipartite,parallel,series,original",
        help="comma list of scenario names expected in nondecreasing CCDF order"
        " ('' disables the check)",
    )

    p = sub.add_parser(
        "verify-theorems", help="replay the interface guarantees on random joints"
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--out", default=None, help="optional JSON report path")

    p = sub.add_parser("acflow", help="solve the AC power flow of a case")
    _add_case(p)
    p.add_argument("--scale", type=float, default=1.0, help="injection scaling factor")
    return parser


def _cmd_parse(args) -> int:
    raw = load_case(args.case)
    net = to_dc_network(raw)
    print(f"baseMVA: {raw.base_mva:g}")
    print(f"buses: {raw.n_buses}  branches: {raw.n_branches}  generators: {raw.n_generators}")
    print(f"in-service lines: {net.n_lines}")
    print(f"connected components: {len(net.connected_components())}")
    print(f"bridges: {len(net.bridges)}")
    if raw.skipped_sections:
        print(f"skipped sections: {', '.join(raw.skipped_sections)}")
    return 0


def _cmd_ptdf(args) -> int:
    net = to_dc_network(load_case(args.case))
    eng = DcSensitivity(net)
    value = eng.ptdf(args.line, net.bus_index(args.source), net.bus_index(args.sink))
    print(f"{value:.12g}")
    return 0


def _cmd_lodf(args) -> int:
    net = to_dc_network(load_case(args.case))
    print(f"{DcSensitivity(net).lodf(args.monitored, args.tripped):.12g}")
    return 0


def _cmd_effsus(args) -> int:
    net = to_dc_network(load_case(args.case))
    eng = DcSensitivity(net)
    value = eng.effective_susceptance(net.bus_index(args.i), net.bus_index(args.j))
    print(f"{value:.12g}")
    return 0


def _find_scenario(scenarios, name):
    for s in scenarios:
        if s.name == name:
            return s
    from .errors import ConfigError

    raise ConfigError(
        f"unknown scenario {name!r}; configured: {[s.name for s in scenarios]}"
    )


def _cmd_apply_interface(args) -> int:
    raw = load_case(args.case)
    config = load_config(Path(args.config).read_text(), raw)
    scenario = _find_scenario(harness.build_scenarios(raw, config), args.scenario)
    net = scenario.net
    spec = scenario.provenance
    print(f"scenario: {scenario.name}")
    print(f"buses: {net.n_buses}  lines: {net.n_lines}")
    print(f"connected: {net.is_connected}  bridges: {len(net.bridges)}")
    print(f"removed branches: {sorted(spec.remove)}")
    print(f"added lines: {[list(a) for a in spec.add]}")
    if scenario.mesh_bound is not None:
        print(f"mesh cross-grid bound: {scenario.mesh_bound:.6g}")
    return 0


def _cmd_design_bipartite(args) -> int:
    spec = design_bipartite(args.b1, args.b2, args.btt)
    print(f"b_ss: {spec.b_ss:.12g}")
    print(f"b_st: {spec.b_st:.12g}")
    print(f"b_ts: {spec.b_ts:.12g}")
    print(f"b_tt: {spec.b_tt:.12g}")
    print(f"cross-grid bound: {bipartite_bound(spec):.6g}")
    return 0


def _cmd_sweep(args) -> int:
    raw = load_case(args.case)
    config = load_config(Path(args.config).read_text(), raw)
    scenarios = harness.build_scenarios(raw, config, with_ac=args.model == "ac")
    scenario = _find_scenario(scenarios, args.scenario)
    records = harness.sweep_lodf(
        scenario,
        args.filter,
        args.model,
        flow_threshold=config.ac_flow_threshold,
        jobs=args.jobs,
    )
    write_results(records, args.out)
    counts = {}
    for r in records:
        counts[r.status] = counts.get(r.status, 0) + 1
    print(f"wrote {len(records)} records to {args.out} ({counts})")
    return 0


def _cmd_experiment(args) -> int:
    raw = load_case(args.case)
    config = load_config(Path(args.config).read_text(), raw)
    if args.clip_floor is not None:
        from dataclasses import replace

        config = replace(config, clip_floor=args.clip_floor)
    models = ("dc", "ac") if args.model == "both" else (args.model,)
    order = [s for s in args.dominance.split(",") if s] if args.dominance else None
    report = harness.run_experiment(
        raw, config, out_dir=args.out, models=models, jobs=args.jobs,
        dominance_order=order,
    )
    print(report.format_text())
    return 0


def _cmd_verify_theorems(args) -> int:
    report = harness.verify_theorems(seed=args.seed, count=args.count)
    print(report.format_text())
    if args.out:
        Path(args.out).write_text(report.to_json())
        print(f"report written to {args.out}")
    return 0 if report.ok else 3


def _cmd_acflow(args) -> int:
    case = to_ac_case(load_case(args.case))
    if args.scale != 1.0:
        case = case.with_scaled_injections(args.scale)
    state = acflow.solve_ac(case)
    flows = acflow.ac_branch_flow(case, state)
    losses = float(flows.losses.real.sum()) * case.base_mva
    print(f"converged in {state.iterations} iterations")
    print(f"max mismatch: {state.max_mismatch:.3e} pu")
    print(f"voltage range: {state.vm.min():.4f} .. {state.vm.max():.4f} pu")
    print(f"angle range: {np.rad2deg(state.va).min():.2f} .. {np.rad2deg(state.va).max():.2f} deg")
    print(f"total losses: {losses:.2f} MW")
    return 0


_COMMANDS = {
    "parse": _cmd_parse,
    "ptdf": _cmd_ptdf,
    "lodf": _cmd_lodf,
    "effsus": _cmd_effsus,
    "apply-interface": _cmd_apply_interface,
    "design-bipartite": _cmd_design_bipartite,
    "sweep": _cmd_sweep,
    "experiment": _cmd_experiment,
    "verify-theorems": _cmd_verify_theorems,
    "acflow": _cmd_acflow,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
