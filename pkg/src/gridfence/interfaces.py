"""Boundary interface networks between two sub-grids.

Given a network made of two sub-grids that share exactly two buses ``s``
and ``t`` (a :class:`TwoBusJoint`), three boundary rewirings reshape how a
line outage in one sub-grid is felt in the other:

* **series** - split both shared buses and reconnect each half through a
  new line, stretching the boundary into two fresh bridges;
* **parallel** - add a direct ``s``-``t`` line, giving displaced power a
  bypass that avoids the far sub-grid;
* **complete bipartite** - split both shared buses and install all four
  cross lines, a Wheatstone-bridge-like 2x2 mesh whose cross-grid outage
  factor is bounded by a closed-form function of the four susceptances and
  vanishes when the 2x2 susceptance matrix has rank one.

The module also computes that bound, the susceptance design that keeps
within-sub-grid outage factors untouched while zeroing cross-grid ones,
and list-style tie-line edits for networks whose sub-grids are joined by
multiple tie lines instead of shared buses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from collections.abc import Iterable

from .dcsens import DcSensitivity
from .errors import DisconnectedNetworkError, NetworkError
from .netmodel import NetworkModel

__all__ = [
    "InterfaceKind",
    "InterfaceSpec",
    "TwoBusJoint",
    "TieLineEdit",
    "apply_interface",
    "bipartite_bound",
    "design_bipartite",
    "apply_tie_edits",
    "check_series_equality_condition",
]


class InterfaceKind(Enum):
    SERIES = "series"
    PARALLEL = "parallel"
    COMPLETE_BIPARTITE = "complete-bipartite"


@dataclass(frozen=True)
class InterfaceSpec:
    """Interface kind plus its line susceptances.

    Susceptance naming: the first subscript is the original bus, the second
    the split copy, so ``b_st`` is the line from ``s`` to the copy ``t'``.
    Series uses ``b_ss, b_tt``; parallel uses ``b_direct``; the complete
    bipartite mesh uses all four of ``b_ss, b_st, b_ts, b_tt``.
    """

    kind: InterfaceKind
    b_ss: float | None = None
    b_st: float | None = None
    b_ts: float | None = None
    b_tt: float | None = None
    b_direct: float | None = None

    def __post_init__(self):
        required = {
            InterfaceKind.SERIES: ("b_ss", "b_tt"),
            InterfaceKind.PARALLEL: ("b_direct",),
            InterfaceKind.COMPLETE_BIPARTITE: ("b_ss", "b_st", "b_ts", "b_tt"),
        }[self.kind]
        for name in required:
            value = getattr(self, name)
            if value is None or value <= 0:
                raise NetworkError(
                    f"{self.kind.value} interface needs positive {name}, got {value}"
                )

    @classmethod
    def series(cls, b_ss: float, b_tt: float) -> "InterfaceSpec":
        return cls(InterfaceKind.SERIES, b_ss=b_ss, b_tt=b_tt)

    @classmethod
    def parallel(cls, b_direct: float) -> "InterfaceSpec":
        return cls(InterfaceKind.PARALLEL, b_direct=b_direct)

    @classmethod
    def complete_bipartite(
        cls, b_ss: float, b_st: float, b_ts: float, b_tt: float
    ) -> "InterfaceSpec":
        return cls(
            InterfaceKind.COMPLETE_BIPARTITE,
            b_ss=b_ss,
            b_st=b_st,
            b_ts=b_ts,
            b_tt=b_tt,
        )

    def transposed(self) -> "InterfaceSpec":
        """The mesh as seen from the split copies (cross arms swapped).

        Bounding outages that originate on the far side uses the bound of
        the transposed mesh; see :func:`bipartite_bound`.
        """
        if self.kind is not InterfaceKind.COMPLETE_BIPARTITE:
            raise NetworkError("only the complete bipartite kind transposes")
        return InterfaceSpec.complete_bipartite(
            self.b_ss, self.b_ts, self.b_st, self.b_tt
        )


class TwoBusJoint:
    """A network split into two sub-grids sharing exactly the buses s, t.

    Construction validates the joint: the bus sets overlap in exactly
    ``{s, t}`` and cover the network, every line lies fully inside one
    sub-grid, the shared buses are not directly connected, and both
    sub-grids are connected on their own.
    """

    def __init__(
        self,
        net: NetworkModel,
        g1_buses: Iterable[int],
        g2_buses: Iterable[int],
        s: int,
        t: int,
    ):
        g1 = frozenset(g1_buses)
        g2 = frozenset(g2_buses)
        if g1 & g2 != {s, t}:
            raise NetworkError(
                f"sub-grid overlap must be exactly {{s={s}, t={t}}}, got {sorted(g1 & g2)}"
            )
        if g1 | g2 != frozenset(range(net.n_buses)):
            raise NetworkError("sub-grid bus sets must cover every bus")
        if net.adjacent(s, t):
            raise NetworkError(
                f"shared buses {s}, {t} must not be directly connected"
            )
        lines1: list[int] = []
        lines2: list[int] = []
        for ln in net.lines:
            ends = {ln.src, ln.dst}
            if ends <= g1:
                lines1.append(ln.id)
            elif ends <= g2:
                lines2.append(ln.id)
            else:
                raise NetworkError(
                    f"line {ln.id} crosses the boundary outside the shared buses"
                )
        self.net = net
        self.g1_buses = g1
        self.g2_buses = g2
        self.s = s
        self.t = t
        self.g1_line_ids = frozenset(lines1)
        self.g2_line_ids = frozenset(lines2)
        for name, buses, lids in (
            ("first", g1, lines1),
            ("second", g2, lines2),
        ):
            sub, _ = self._subnetwork(buses, lids)
            if not sub.is_connected:
                raise DisconnectedNetworkError(f"{name} sub-grid is not connected")

    def _subnetwork(
        self, buses: frozenset[int], line_ids: list[int]
    ) -> tuple[NetworkModel, dict[int, int]]:
        sub, remap = self.net.induced_subnetwork(buses)
        sub = sub.remove_lines(set(sub.line_ids) - set(line_ids))
        return sub, remap

    def subgrid(self, side: int) -> tuple[NetworkModel, dict[int, int]]:
        """Sub-network of side 1 or 2 plus the old-to-new bus index map."""
        if side == 1:
            return self._subnetwork(self.g1_buses, sorted(self.g1_line_ids))
        if side == 2:
            return self._subnetwork(self.g2_buses, sorted(self.g2_line_ids))
        raise NetworkError(f"side must be 1 or 2, got {side}")

    def swapped(self) -> "TwoBusJoint":
        """The same joint with the sub-grid roles exchanged."""
        return TwoBusJoint(self.net, self.g2_buses, self.g1_buses, self.s, self.t)

    def line_side(self, line_id: int) -> int:
        if line_id in self.g1_line_ids:
            return 1
        if line_id in self.g2_line_ids:
            return 2
        raise NetworkError(f"unknown line id {line_id}")

    def effective_susceptances(self) -> tuple[float, float]:
        """Effective susceptance between s and t of each sub-grid alone."""
        out = []
        for side in (1, 2):
            sub, remap = self.subgrid(side)
            eng = DcSensitivity(sub)
            out.append(eng.effective_susceptance(remap[self.s], remap[self.t]))
        return out[0], out[1]


@dataclass(frozen=True)
class TieLineEdit:
    """Batch edit for multi-tie-line boundaries: drop some lines, add others."""

    remove: frozenset[int] = frozenset()
    add: tuple[tuple[int, int, float], ...] = field(default_factory=tuple)


def _split_to_boundary(joint: TwoBusJoint) -> tuple[NetworkModel, int, int]:
    """Split s and t, moving the second sub-grid's incident lines onto the
    fresh copies.  Returns (network, s_copy, t_copy)."""
    net = joint.net
    s_moved = [
        ln.id
        for ln in net.lines_at(joint.s)
        if ln.id in joint.g2_line_ids
    ]
    s_copy = net.n_buses
    net = net.split_bus(joint.s, s_moved)
    t_moved = [
        ln.id
        for ln in net.lines_at(joint.t)
        if ln.id in joint.g2_line_ids
    ]
    t_copy = net.n_buses
    net = net.split_bus(joint.t, t_moved)
    return net, s_copy, t_copy


def apply_interface(joint: TwoBusJoint, spec: InterfaceSpec) -> NetworkModel:
    """Rewire the joint's boundary according to the interface spec.

    All original line ids survive; new interface lines get fresh ids.  The
    split copies of ``s`` and ``t`` (for the series and complete-bipartite
    kinds) take bus indices ``n`` and ``n+1`` of the original network.
    """
    if spec.kind is InterfaceKind.PARALLEL:
        return joint.net.add_line(joint.s, joint.t, spec.b_direct)
    net, s_copy, t_copy = _split_to_boundary(joint)
    if spec.kind is InterfaceKind.SERIES:
        net = net.add_line(joint.s, s_copy, spec.b_ss)
        net = net.add_line(joint.t, t_copy, spec.b_tt)
        return net
    net = net.add_line(joint.s, s_copy, spec.b_ss)
    net = net.add_line(joint.s, t_copy, spec.b_st)
    net = net.add_line(joint.t, s_copy, spec.b_ts)
    net = net.add_line(joint.t, t_copy, spec.b_tt)
    return net


def bipartite_bound(spec: InterfaceSpec) -> float:
    """Upper bound on cross-sub-grid outage factors through the mesh.

    ``|b_ss*b_tt - b_st*b_ts| / ((b_ss + b_st) * (b_tt + b_ts))``; zero
    exactly when the 2x2 susceptance matrix is rank one.

    The bound is exact as a supremum and directional: it governs outages
    on the side attached at ``s, t`` felt beyond ``s', t'``.  The reverse
    direction is governed by ``bipartite_bound(spec.transposed())`` (the
    denominator sums swap to the split copies' weighted degrees); the max
    of the two covers every cross pair.  A rank-one mesh zeroes both.
    """
    if spec.kind is not InterfaceKind.COMPLETE_BIPARTITE:
        raise NetworkError(f"bound is defined for the complete bipartite kind, got {spec.kind.value}")
    num = abs(spec.b_ss * spec.b_tt - spec.b_st * spec.b_ts)
    den = (spec.b_ss + spec.b_st) * (spec.b_tt + spec.b_ts)
    return num / den


def design_bipartite(b1: float, b2: float, b_tt: float) -> InterfaceSpec:
    """Mesh susceptances that decouple the sub-grids without changing them.

    ``b1`` and ``b2`` are the effective susceptances between the shared
    buses of each sub-grid alone; ``b_tt`` is the chosen susceptance of the
    ``t``-``t'`` line and must lie strictly outside ``[min(b1, b2),
    max(b1, b2)]`` so every derived susceptance stays positive.  The
    resulting 2x2 susceptance matrix is rank one, so the cross-grid bound
    is zero, while each sub-grid still sees the same equivalent susceptance
    across the boundary as before.
    """
    for name, val in (("b1", b1), ("b2", b2), ("b_tt", b_tt)):
        if val <= 0:
            raise NetworkError(f"{name} must be positive, got {val}")
    lo, hi = min(b1, b2), max(b1, b2)
    if lo <= b_tt <= hi:
        raise NetworkError(
            f"b_tt={b_tt} must lie strictly outside [{lo}, {hi}]"
        )
    b_ss = b1 * b2 / b_tt
    b_st = b2 * (b1 - b_tt) / (b2 - b_tt)
    b_ts = b1 * (b2 - b_tt) / (b1 - b_tt)
    if min(b_ss, b_st, b_ts) <= 0:
        raise NetworkError(
            f"derived susceptances ({b_ss:.4g}, {b_st:.4g}, {b_ts:.4g}) "
            "must all be positive"
        )
    return InterfaceSpec.complete_bipartite(b_ss, b_st, b_ts, b_tt)


def apply_tie_edits(net: NetworkModel, edit: TieLineEdit) -> NetworkModel:
    """Apply a remove/add batch and verify the result stays connected.

    Added lines get ids above every pre-edit id, so they never shadow a
    removed line in downstream records.
    """
    next_id = max(net.line_ids, default=-1) + 1
    out = net.remove_lines(edit.remove) if edit.remove else net
    for src, dst, b in edit.add:
        out = out.add_line(src, dst, b, line_id=next_id)
        next_id += 1
    if not out.is_connected:
        raise DisconnectedNetworkError(
            f"tie edit (remove {sorted(edit.remove)}, add {list(edit.add)}) "
            "disconnects the network"
        )
    return out


def check_series_equality_condition(joint: TwoBusJoint, tripped_id: int) -> bool:
    """True iff the outage severs every s-t path inside the first sub-grid.

    Under the series interface this is exactly the situation in which the
    cross-grid outage factor keeps its original magnitude; otherwise it
    strictly shrinks.
    """
    if tripped_id not in joint.g1_line_ids:
        raise NetworkError(f"line {tripped_id} is not in the first sub-grid")
    sub, remap = joint.subgrid(1)
    depleted = sub.remove_lines([tripped_id])
    s, t = remap[joint.s], remap[joint.t]
    return not any(
        s in comp and t in comp for comp in depleted.components
    )
