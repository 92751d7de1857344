"""Immutable graph model of a transmission network.

A network is a directed multigraph of buses and susceptance-weighted lines.
Each line has a fixed orientation chosen at construction; flows and
sensitivity factors are signed relative to that orientation.  The signed
incidence matrix ``C`` (one ``+1`` at the source bus and one ``-1`` at the
destination per column) and the weighted Laplacian ``L = C B C^T`` with
``B = diag(susceptances)`` are materialized once and never mutated.

Edits (line removal/addition, bus splits) return new :class:`NetworkModel`
values so that pre- and post-modification networks can be compared side by
side.  Parallel lines are first class: two lines may share both endpoints
and only differ in their id.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NetworkError

__all__ = ["Line", "NetworkModel", "build_network"]


@dataclass(frozen=True)
class Line:
    """One transmission line: oriented bus pair plus positive susceptance."""

    id: int
    src: int
    dst: int
    susceptance: float


class NetworkModel:
    """Immutable bus/line multigraph with incidence and Laplacian matrices.

    Bus indices are dense ``0..n_buses-1``.  ``bus_labels`` keeps the
    external identifiers (e.g. case-file bus numbers) for reporting; it is
    purely cosmetic.  Line ids are arbitrary integers, unique within one
    network, and survive edits so that the same physical line can be
    tracked across modified networks.
    """

    def __init__(
        self,
        n_buses: int,
        lines: Sequence[Line],
        bus_labels: Sequence[object] | None = None,
    ):
        if n_buses < 1:
            raise NetworkError("network needs at least one bus")
        if bus_labels is None:
            bus_labels = tuple(range(n_buses))
        else:
            bus_labels = tuple(bus_labels)
            if len(bus_labels) != n_buses:
                raise NetworkError(
                    f"{len(bus_labels)} bus labels for {n_buses} buses"
                )
            if len(set(bus_labels)) != n_buses:
                raise NetworkError("duplicate bus labels")
        lines = tuple(lines)
        seen: set[int] = set()
        for ln in lines:
            if not (0 <= ln.src < n_buses and 0 <= ln.dst < n_buses):
                raise NetworkError(f"line {ln.id} endpoint out of range")
            if ln.src == ln.dst:
                raise NetworkError(f"line {ln.id} is a self-loop at bus {ln.src}")
            if ln.susceptance <= 0 or not np.isfinite(ln.susceptance):
                raise NetworkError(
                    f"line {ln.id} susceptance {ln.susceptance} is not positive"
                )
            if ln.id in seen:
                raise NetworkError(f"duplicate line id {ln.id}")
            seen.add(ln.id)

        self._n = n_buses
        self._lines = lines
        self._labels = bus_labels
        self._pos = {ln.id: k for k, ln in enumerate(lines)}

        m = len(lines)
        C = np.zeros((n_buses, m))
        for k, ln in enumerate(lines):
            C[ln.src, k] = 1.0
            C[ln.dst, k] = -1.0
        b = np.array([ln.susceptance for ln in lines])
        L = (C * b) @ C.T
        C.setflags(write=False)
        b.setflags(write=False)
        L.setflags(write=False)
        self._incidence = C
        self._susceptances = b
        self._laplacian = L

    # -- basic accessors ---------------------------------------------------

    @property
    def n_buses(self) -> int:
        return self._n

    @property
    def n_lines(self) -> int:
        return len(self._lines)

    @property
    def lines(self) -> tuple[Line, ...]:
        return self._lines

    @property
    def bus_labels(self) -> tuple:
        return self._labels

    @property
    def incidence(self) -> np.ndarray:
        """Signed bus-by-line incidence matrix (read-only view)."""
        return self._incidence

    @property
    def susceptances(self) -> np.ndarray:
        """Per-line susceptances in column order of :attr:`incidence`."""
        return self._susceptances

    @property
    def laplacian(self) -> np.ndarray:
        """Susceptance-weighted Laplacian (read-only view)."""
        return self._laplacian

    @cached_property
    def line_ids(self) -> tuple[int, ...]:
        return tuple(ln.id for ln in self._lines)

    def line(self, line_id: int) -> Line:
        try:
            return self._lines[self._pos[line_id]]
        except KeyError:
            raise NetworkError(f"unknown line id {line_id}") from None

    def line_index(self, line_id: int) -> int:
        """Column of ``line_id`` in the incidence matrix."""
        try:
            return self._pos[line_id]
        except KeyError:
            raise NetworkError(f"unknown line id {line_id}") from None

    def has_line(self, line_id: int) -> bool:
        return line_id in self._pos

    def lines_at(self, bus: int) -> tuple[Line, ...]:
        """All lines incident to ``bus`` (either endpoint)."""
        self._check_bus(bus)
        return tuple(ln for ln in self._lines if bus in (ln.src, ln.dst))

    def adjacent(self, i: int, j: int) -> bool:
        """True if some line directly connects buses ``i`` and ``j``."""
        self._check_bus(i)
        self._check_bus(j)
        return any({ln.src, ln.dst} == {i, j} for ln in self._lines)

    def bus_index(self, label: object) -> int:
        """Dense index of the bus with external label ``label``."""
        try:
            return self._label_index[label]
        except KeyError:
            raise NetworkError(f"unknown bus label {label!r}") from None

    @cached_property
    def _label_index(self) -> dict:
        return {lab: i for i, lab in enumerate(self._labels)}

    def _check_bus(self, bus: int) -> None:
        if not (0 <= bus < self._n):
            raise NetworkError(f"bus index {bus} out of range")

    # -- connectivity ------------------------------------------------------

    @cached_property
    def _adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-bus list of (neighbor bus, line position)."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self._n)]
        for k, ln in enumerate(self._lines):
            adj[ln.src].append((ln.dst, k))
            adj[ln.dst].append((ln.src, k))
        return adj

    @cached_property
    def components(self) -> tuple[frozenset[int], ...]:
        """Connected components as bus-index sets, ordered by smallest bus."""
        seen = [False] * self._n
        comps: list[frozenset[int]] = []
        for root in range(self._n):
            if seen[root]:
                continue
            stack = [root]
            seen[root] = True
            comp = [root]
            while stack:
                v = stack.pop()
                for w, _ in self._adjacency[v]:
                    if not seen[w]:
                        seen[w] = True
                        comp.append(w)
                        stack.append(w)
            comps.append(frozenset(comp))
        return tuple(comps)

    def connected_components(self) -> tuple[frozenset[int], ...]:
        return self.components

    @property
    def is_connected(self) -> bool:
        return len(self.components) == 1

    @cached_property
    def bridges(self) -> frozenset[int]:
        """Ids of all lines whose removal disconnects their component.

        Iterative lowpoint search over the multigraph; a parallel duplicate
        is never a bridge because only the tree edge itself (by position,
        not by endpoint pair) is excluded when computing lowpoints.
        """
        n = self._n
        adj = self._adjacency
        disc = [-1] * n
        low = [0] * n
        out: list[int] = []
        timer = 0
        for root in range(n):
            if disc[root] != -1:
                continue
            disc[root] = low[root] = timer
            timer += 1
            stack: list[tuple[int, int, Iterable[tuple[int, int]]]] = [
                (root, -1, iter(adj[root]))
            ]
            while stack:
                v, entry_edge, it = stack[-1]
                pushed = False
                for w, k in it:
                    if k == entry_edge:
                        continue
                    if disc[w] == -1:
                        disc[w] = low[w] = timer
                        timer += 1
                        stack.append((w, k, iter(adj[w])))
                        pushed = True
                        break
                    low[v] = min(low[v], disc[w])
                if pushed:
                    continue
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        out.append(self._lines[entry_edge].id)
        return frozenset(out)

    def is_bridge(self, line_id: int) -> bool:
        self.line(line_id)
        return line_id in self.bridges

    # -- edits (return new networks) ----------------------------------------

    def remove_lines(self, line_ids: Iterable[int]) -> "NetworkModel":
        """New network without the given lines; buses are kept."""
        drop = set(line_ids)
        for lid in drop:
            self.line(lid)
        kept = [ln for ln in self._lines if ln.id not in drop]
        return NetworkModel(self._n, kept, self._labels)

    def add_line(
        self, src: int, dst: int, susceptance: float, line_id: int | None = None
    ) -> "NetworkModel":
        """New network with one extra line; parallel duplicates allowed."""
        self._check_bus(src)
        self._check_bus(dst)
        if line_id is None:
            line_id = max(self._pos, default=-1) + 1
        elif line_id in self._pos:
            raise NetworkError(f"line id {line_id} already in use")
        new = Line(line_id, src, dst, susceptance)
        return NetworkModel(self._n, self._lines + (new,), self._labels)

    def replace_susceptance(self, line_id: int, susceptance: float) -> "NetworkModel":
        """New network with one line's susceptance changed in place."""
        k = self.line_index(line_id)
        ln = self._lines[k]
        swapped = self._lines[:k] + (Line(ln.id, ln.src, ln.dst, susceptance),) + self._lines[k + 1 :]
        return NetworkModel(self._n, swapped, self._labels)

    def split_bus(
        self,
        bus: int,
        line_ids: Iterable[int],
        new_label: object | None = None,
    ) -> "NetworkModel":
        """Split ``bus``: move the chosen incident lines onto a fresh bus.

        The new bus gets index ``n_buses`` (of this network).  Moved lines
        keep their ids; the endpoint equal to ``bus`` is rewritten.  No line
        connects the old and new bus afterwards unless one is added.
        """
        self._check_bus(bus)
        move = set(line_ids)
        new_bus = self._n
        moved: list[Line] = []
        for lid in move:
            ln = self.line(lid)
            if bus not in (ln.src, ln.dst):
                raise NetworkError(f"line {lid} is not incident to bus {bus}")
            src = new_bus if ln.src == bus else ln.src
            dst = new_bus if ln.dst == bus else ln.dst
            moved.append(Line(ln.id, src, dst, ln.susceptance))
        kept = [ln for ln in self._lines if ln.id not in move]
        if new_label is None:
            new_label = self._fresh_label(bus)
        return NetworkModel(
            self._n + 1, kept + moved, self._labels + (new_label,)
        )

    def _fresh_label(self, bus: int) -> object:
        base = f"{self._labels[bus]}'"
        label = base
        k = 2
        while label in self._label_index:
            label = f"{base}{k}"
            k += 1
        return label

    def induced_subnetwork(
        self, buses: Iterable[int]
    ) -> tuple["NetworkModel", dict[int, int]]:
        """Sub-network on ``buses`` with every line lying fully inside.

        Returns the sub-network (buses reindexed densely, line ids kept)
        and the old-to-new bus index map.
        """
        keep = sorted(set(buses))
        for b in keep:
            self._check_bus(b)
        remap = {old: new for new, old in enumerate(keep)}
        sub_lines = [
            Line(ln.id, remap[ln.src], remap[ln.dst], ln.susceptance)
            for ln in self._lines
            if ln.src in remap and ln.dst in remap
        ]
        labels = tuple(self._labels[b] for b in keep)
        return NetworkModel(len(keep), sub_lines, labels), remap

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"NetworkModel(n_buses={self._n}, n_lines={self.n_lines})"


def build_network(
    buses: int | Sequence[object],
    lines: Iterable[Line | tuple],
) -> NetworkModel:
    """Construct a network from a bus count (or label list) and lines.

    ``lines`` may mix :class:`Line` values with ``(src, dst, susceptance)``
    tuples; tuples are assigned ids by position.
    """
    if isinstance(buses, int):
        n, labels = buses, None
    else:
        labels = tuple(buses)
        n = len(labels)
    realized: list[Line] = []
    for k, spec in enumerate(lines):
        if isinstance(spec, Line):
            realized.append(spec)
        else:
            src, dst, b = spec
            realized.append(Line(k, int(src), int(dst), float(b)))
    return NetworkModel(n, realized, labels)
