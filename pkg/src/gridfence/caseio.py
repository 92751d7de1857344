"""Case-file parsing, experiment configuration, and result serialization.

Reads the MATPOWER ``.m`` subset actually needed here (``baseMVA``,
``bus``, ``gen``, ``branch`` matrices) with tolerant whitespace/comment
handling; any other ``mpc.*`` sections are recorded and skipped with a
notice.  Experiment configurations are JSON documents that name a bus
partition, the tie lines crossing it, and the boundary rewiring recipe for
each scenario; they are cross-validated against the parsed case before
use.  Results go out as plain CSV, small enough to diff in review.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .acflow import ACCase, PQ, PV, SLACK
from .errors import ConfigError, NetworkError, ParseError
from .netmodel import Line, NetworkModel

logger = logging.getLogger(__name__)

__all__ = [
    "RawCase",
    "ScenarioSpec",
    "ExperimentConfig",
    "LodfRecord",
    "parse_matpower",
    "load_case",
    "to_dc_network",
    "to_ac_case",
    "load_config",
    "write_results",
    "read_results",
    "write_ccdf",
]

# Bus table columns.
BUS_I, BUS_TYPE, PD, QD, GS, BS = 0, 1, 2, 3, 4, 5
# Generator table columns.
GEN_BUS, GEN_PG, GEN_QG, GEN_VG, GEN_STATUS = 0, 1, 2, 5, 7
# Branch table columns.
F_BUS, T_BUS, BR_R, BR_X, BR_B, BR_RATIO, BR_ANGLE, BR_STATUS = (
    0, 1, 2, 3, 4, 8, 9, 10,
)

_REQUIRED_SECTIONS = ("bus", "gen", "branch")
_MIN_COLUMNS = {"bus": 13, "gen": 10, "branch": 11}


@dataclass(frozen=True)
class RawCase:
    """Numeric tables of one parsed case plus the MVA base."""

    base_mva: float
    bus: np.ndarray
    gen: np.ndarray
    branch: np.ndarray
    skipped_sections: tuple[str, ...] = ()

    @property
    def n_buses(self) -> int:
        return self.bus.shape[0]

    @property
    def n_branches(self) -> int:
        return self.branch.shape[0]

    @property
    def n_generators(self) -> int:
        return self.gen.shape[0]

    def bus_number_to_index(self) -> dict[int, int]:
        return {int(b): k for k, b in enumerate(self.bus[:, BUS_I])}


def _extract_matrix(
    text: str, name: str
) -> tuple[list[list[float]], int] | None:
    """Rows of ``mpc.<name> = [...];`` plus the 1-based line of the header."""
    pattern = re.compile(
        r"mpc\." + re.escape(name) + r"\s*=\s*\[(.*?)\];", re.DOTALL
    )
    match = pattern.search(text)
    if match is None:
        return None
    header_line = text[: match.start()].count("\n") + 1
    rows: list[list[float]] = []
    for offset, raw in enumerate(match.group(1).split("\n")):
        line = raw.split("%", 1)[0].strip().rstrip(";").strip()
        if not line:
            continue
        try:
            rows.append([float(tok) for tok in line.split()])
        except ValueError as exc:
            raise ParseError(
                f"malformed {name} row: {exc}", line=header_line + offset
            ) from None
    return rows, header_line


def parse_matpower(text: str) -> RawCase:
    """Parse the MATPOWER subset of a case file.

    Raises :class:`ParseError` (with a line number where possible) for
    missing sections, ragged or malformed rows, dangling bus references,
    and in-service branches with zero reactance.
    """
    base_match = re.search(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)\s*;", text)
    if base_match is None:
        raise ParseError("missing mpc.baseMVA")
    base_mva = float(base_match.group(1))

    tables: dict[str, np.ndarray] = {}
    for name in _REQUIRED_SECTIONS:
        got = _extract_matrix(text, name)
        if got is None:
            raise ParseError(f"missing mpc.{name} section")
        rows, header_line = got
        if not rows:
            raise ParseError(f"empty mpc.{name} section", line=header_line)
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ParseError(
                f"ragged mpc.{name} rows (widths {sorted(widths)})",
                line=header_line,
            )
        if widths.pop() < _MIN_COLUMNS[name]:
            raise ParseError(
                f"mpc.{name} needs at least {_MIN_COLUMNS[name]} columns",
                line=header_line,
            )
        tables[name] = np.array(rows)

    skipped = tuple(
        sorted(
            set(re.findall(r"mpc\.(\w+)\s*=", text))
            - {"baseMVA", "version", *_REQUIRED_SECTIONS}
        )
    )
    if skipped:
        logger.info("skipping case sections: %s", ", ".join(skipped))

    case = RawCase(
        base_mva, tables["bus"], tables["gen"], tables["branch"], skipped
    )
    numbers = {int(b) for b in case.bus[:, BUS_I]}
    if len(numbers) != case.n_buses:
        raise ParseError("duplicate bus numbers in mpc.bus")
    for label, table, col in (
        ("gen", case.gen, GEN_BUS),
        ("branch", case.branch, F_BUS),
        ("branch", case.branch, T_BUS),
    ):
        dangling = {int(b) for b in table[:, col]} - numbers
        if dangling:
            raise ParseError(f"mpc.{label} references unknown buses {sorted(dangling)}")
    live = case.branch[:, BR_STATUS] != 0
    if np.any(case.branch[live, BR_X] == 0.0):
        bad = np.flatnonzero(live & (case.branch[:, BR_X] == 0.0))
        raise ParseError(f"in-service branch rows {bad.tolist()} have zero reactance")
    return case


def load_case(path: str | Path) -> RawCase:
    return parse_matpower(Path(path).read_text())


def to_dc_network(raw: RawCase, absolute_susceptance: bool = False) -> NetworkModel:
    """Susceptance-weighted graph of the in-service branches.

    Each branch contributes ``b = 1/x``; resistance, charging, taps and
    shifts have no place in the linear flow model.  Line ids are the
    0-based branch-table rows; bus labels are the case bus numbers.
    Branches with negative reactance are rejected unless
    ``absolute_susceptance`` is set, which takes ``|b|`` and logs it.
    """
    index_of = raw.bus_number_to_index()
    lines = []
    for row_id in range(raw.n_branches):
        row = raw.branch[row_id]
        if row[BR_STATUS] == 0:
            continue
        x = float(row[BR_X])
        if x < 0:
            if not absolute_susceptance:
                raise NetworkError(
                    f"branch row {row_id} has negative reactance {x}; pass "
                    "absolute_susceptance=True to take its magnitude"
                )
            logger.warning(
                "branch row %d: negative reactance %g, using |b|", row_id, x
            )
        lines.append(
            Line(row_id, index_of[int(row[F_BUS])], index_of[int(row[T_BUS])],
                 1.0 / abs(x))
        )
    labels = tuple(int(b) for b in raw.bus[:, BUS_I])
    return NetworkModel(raw.n_buses, lines, labels)


def to_ac_case(raw: RawCase) -> ACCase:
    """AC case with net per-unit injections folded from the gen/bus tables.

    In-service generator outputs aggregate per bus; a bus hosting at least
    one in-service generator keeps its table type (PV or slack), everything
    else is PQ.  Magnitude setpoints come from the generator voltage
    column.
    """
    index_of = raw.bus_number_to_index()
    n = raw.n_buses
    p = -raw.bus[:, PD] / raw.base_mva
    q = -raw.bus[:, QD] / raw.base_mva
    v_set = np.ones(n)
    has_gen = np.zeros(n, dtype=bool)
    for row in raw.gen:
        if row[GEN_STATUS] == 0:
            continue
        k = index_of[int(row[GEN_BUS])]
        p[k] += row[GEN_PG] / raw.base_mva
        q[k] += row[GEN_QG] / raw.base_mva
        v_set[k] = row[GEN_VG]
        has_gen[k] = True

    bus_type = np.full(n, PQ)
    for k in range(n):
        declared = int(raw.bus[k, BUS_TYPE])
        if declared == SLACK:
            bus_type[k] = SLACK
            v_set[k] = v_set[k] if has_gen[k] else raw.bus[k, 7]
        elif declared == PV and has_gen[k]:
            bus_type[k] = PV

    return ACCase(
        base_mva=raw.base_mva,
        bus_type=bus_type,
        p_inj=p,
        q_inj=q,
        v_set=v_set,
        shunt_g=raw.bus[:, GS] / raw.base_mva,
        shunt_b=raw.bus[:, BS] / raw.base_mva,
        br_from=np.array([index_of[int(b)] for b in raw.branch[:, F_BUS]]),
        br_to=np.array([index_of[int(b)] for b in raw.branch[:, T_BUS]]),
        br_r=raw.branch[:, BR_R],
        br_x=raw.branch[:, BR_X],
        br_charge=raw.branch[:, BR_B],
        br_tap=raw.branch[:, BR_RATIO],
        br_shift=np.deg2rad(raw.branch[:, BR_ANGLE]),
        br_status=raw.branch[:, BR_STATUS] != 0,
        bus_labels=tuple(int(b) for b in raw.bus[:, BUS_I]),
    )


# -- experiment configuration --------------------------------------------------


@dataclass(frozen=True)
class ScenarioSpec:
    """One boundary rewiring: branches to switch off, lines to add.

    ``add`` entries are (from bus number, to bus number, susceptance).
    ``mesh`` optionally names the four buses of a 2x2 boundary mesh as
    ``(s, t, s_copy, t_copy)`` so the closed-form cross-grid bound can be
    reported for the scenario.
    """

    name: str
    remove: tuple[int, ...] = ()
    add: tuple[tuple[int, int, float], ...] = ()
    mesh: tuple[int, int, int, int] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description bound to one case."""

    name: str
    g1_bus_numbers: frozenset[int]
    g2_bus_numbers: frozenset[int]
    tie_line_ids: tuple[int, ...]
    scenarios: tuple[ScenarioSpec, ...]
    thresholds: tuple[float, ...] = (0.01, 0.001, 1e-8)
    clip_floor: float = 1e-8
    ac_flow_threshold: float = 1e-3

    def side_of_bus(self, bus_number: int) -> int:
        if bus_number in self.g1_bus_numbers:
            return 1
        if bus_number in self.g2_bus_numbers:
            return 2
        raise ConfigError(f"bus {bus_number} is in neither partition side")


def _crossing_lines(net: NetworkModel, g1_numbers: frozenset[int]) -> set[int]:
    crossing = set()
    for ln in net.lines:
        src_in = net.bus_labels[ln.src] in g1_numbers
        dst_in = net.bus_labels[ln.dst] in g1_numbers
        if src_in != dst_in:
            crossing.add(ln.id)
    return crossing


def load_config(source: str | Mapping, raw: RawCase) -> ExperimentConfig:
    """Parse and cross-validate an experiment configuration.

    Checks that the partition covers all case buses disjointly and that
    the declared tie lines are exactly the branches crossing it; scenario
    edits are validated structurally when scenarios are built.
    """
    if isinstance(source, Mapping):
        doc = dict(source)
    else:
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None

    try:
        g1 = frozenset(int(b) for b in doc["partition"]["g1"])
        g2 = frozenset(int(b) for b in doc["partition"]["g2"])
        ties = tuple(int(t) for t in doc["tie_lines"])
        raw_scenarios = doc["scenarios"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"config missing required field: {exc}") from None

    case_numbers = {int(b) for b in raw.bus[:, BUS_I]}
    if g1 & g2:
        raise ConfigError(f"partition sides overlap on buses {sorted(g1 & g2)}")
    if g1 | g2 != case_numbers:
        missing = sorted(case_numbers - (g1 | g2))
        extra = sorted((g1 | g2) - case_numbers)
        raise ConfigError(
            f"partition must cover the case buses exactly "
            f"(missing {missing}, unknown {extra})"
        )
    if not g1 or not g2:
        raise ConfigError("both partition sides must be non-empty")

    net = to_dc_network(raw)
    crossing = _crossing_lines(net, g1)
    if set(ties) != crossing:
        raise ConfigError(
            f"declared tie lines {sorted(ties)} do not match the computed "
            f"crossing set {sorted(crossing)}"
        )

    scenarios = []
    seen_names = set()
    for item in raw_scenarios:
        try:
            spec = ScenarioSpec(
                name=str(item["name"]),
                remove=tuple(int(r) for r in item.get("remove", ())),
                add=tuple(
                    (int(u), int(v), float(b)) for u, v, b in item.get("add", ())
                ),
                mesh=tuple(int(b) for b in item["mesh"]) if "mesh" in item else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad scenario entry {item!r}: {exc}") from None
        if spec.name in seen_names:
            raise ConfigError(f"duplicate scenario name {spec.name!r}")
        seen_names.add(spec.name)
        unknown = set(spec.remove) - set(net.line_ids)
        if unknown:
            raise ConfigError(
                f"scenario {spec.name!r} removes unknown branches {sorted(unknown)}"
            )
        for u, v, b in spec.add:
            if u not in case_numbers or v not in case_numbers:
                raise ConfigError(
                    f"scenario {spec.name!r} adds a line at unknown buses ({u}, {v})"
                )
            if b <= 0:
                raise ConfigError(
                    f"scenario {spec.name!r} adds a non-positive susceptance {b}"
                )
        if spec.mesh is not None and len(spec.mesh) != 4:
            raise ConfigError(
                f"scenario {spec.name!r} mesh must name exactly 4 buses"
            )
        scenarios.append(spec)

    return ExperimentConfig(
        name=str(doc.get("name", "experiment")),
        g1_bus_numbers=g1,
        g2_bus_numbers=g2,
        tie_line_ids=ties,
        scenarios=tuple(scenarios),
        thresholds=tuple(doc.get("thresholds", (0.01, 0.001, 1e-8))),
        clip_floor=float(doc.get("clip_floor", 1e-8)),
        ac_flow_threshold=float(doc.get("ac_flow_threshold", 1e-3)),
    )


# -- result records -------------------------------------------------------------


@dataclass(frozen=True)
class LodfRecord:
    """One (scenario, tripped, monitored) outage-factor observation."""

    scenario: str
    tripped: int
    monitored: int
    model: str
    lodf: float | None
    status: str

    SORT_KEY = staticmethod(lambda r: (r.scenario, r.tripped, r.monitored, r.model))


RESULT_HEADER = ("scenario", "tripped", "monitored", "model", "lodf", "status")


def write_results(records: Iterable[LodfRecord], path: str | Path) -> None:
    """Write records as CSV in deterministic (scenario, tripped, monitored)
    order; the value field is empty for rows without a defined factor."""
    ordered = sorted(records, key=LodfRecord.SORT_KEY)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULT_HEADER)
        for r in ordered:
            value = "" if r.lodf is None else repr(float(r.lodf))
            writer.writerow(
                (r.scenario, r.tripped, r.monitored, r.model, value, r.status)
            )


def read_results(path: str | Path) -> list[LodfRecord]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader))
        if header != RESULT_HEADER:
            raise ParseError(f"unexpected results header {header}")
        out = []
        for row in reader:
            scenario, tripped, monitored, model, value, status = row
            out.append(
                LodfRecord(
                    scenario,
                    int(tripped),
                    int(monitored),
                    model,
                    float(value) if value else None,
                    status,
                )
            )
    return out


def write_ccdf(thresholds: Sequence[float], values: Sequence[float], path: str | Path) -> None:
    """Write one survival curve as ``threshold,ccdf`` rows."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("threshold", "ccdf"))
        for thr, val in zip(thresholds, values):
            writer.writerow((repr(float(thr)), repr(float(val))))
