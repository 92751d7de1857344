#!/usr/bin/env python3
"""Regenerate the committed AC reference solution for the 118-bus case.

The reference comes from the test suite's independent rectangular-coordinate
solver (tests/ac_oracle.py), not from the package's own Newton solver, so
the committed fixture stays a genuine cross-check.

Usage: python3 tools/make_ac_reference.py
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from gridfence.caseio import load_case, to_ac_case  # noqa: E402

import ac_oracle  # noqa: E402


def main() -> None:
    case = to_ac_case(load_case(ROOT / "src/gridfence/data/case118.m"))
    vm, va = ac_oracle.solve_rectangular(case)
    p_from, q_from = ac_oracle.from_end_flows_by_loops(case, vm, va)
    out = {
        "description": "118-bus nominal AC solution (independent rectangular solver)",
        "vm": vm.tolist(),
        "va": va.tolist(),
        "p_from": p_from.tolist(),
        "q_from": q_from.tolist(),
    }
    target = ROOT / "tests/fixtures/case118_ac_reference.json"
    target.write_text(json.dumps(out, indent=1))
    print(f"wrote {target} (vm range {vm.min():.4f}..{vm.max():.4f})")


if __name__ == "__main__":
    main()
