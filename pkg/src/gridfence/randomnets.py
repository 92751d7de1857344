"""Random network and two-bus-joint generators for property sweeps.

Used by the theorem verification harness and by the test suite; all
randomness flows through a caller-supplied :class:`numpy.random.Generator`
so runs are reproducible from a seed.
"""

from __future__ import annotations

import numpy as np

from .interfaces import TwoBusJoint
from .netmodel import Line, NetworkModel

__all__ = ["random_connected_multigraph", "random_two_bus_joint"]

_B_RANGE = (0.1, 10.0)


def _random_edges(rng: np.random.Generator, n: int, p: float) -> list[tuple[int, int]]:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return edges


def _connected(n: int, edges: list[tuple[int, int]]) -> bool:
    if n == 0:
        return False
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def random_connected_multigraph(
    rng: np.random.Generator,
    n_min: int = 4,
    n_max: int = 20,
    edge_prob: float = 0.4,
    parallel_prob: float = 0.1,
) -> NetworkModel:
    """Connected multigraph with random susceptances in ``[0.1, 10]``.

    Rejection-samples an Erdos-Renyi graph until connected, then duplicates
    a few edges so parallel lines show up in the corpus.
    """
    n = int(rng.integers(n_min, n_max + 1))
    while True:
        edges = _random_edges(rng, n, edge_prob)
        if _connected(n, edges):
            break
    for u, v in list(edges):
        if rng.random() < parallel_prob:
            edges.append((u, v))
    lines = [
        Line(k, u, v, float(rng.uniform(*_B_RANGE))) for k, (u, v) in enumerate(edges)
    ]
    return NetworkModel(n, lines)


def random_two_bus_joint(
    rng: np.random.Generator,
    n_min: int = 4,
    n_max: int = 12,
    edge_prob: float = 0.4,
) -> TwoBusJoint:
    """Two random connected sub-grids glued at a fresh bus pair ``s, t``.

    Each sub-grid is an Erdos-Renyi graph containing both joint buses;
    samples are rejected until both sub-grids are connected and no line
    joins ``s`` and ``t`` directly.
    """
    while True:
        n1 = int(rng.integers(n_min, n_max + 1))
        n2 = int(rng.integers(n_min, n_max + 1))
        e1 = _random_edges(rng, n1, edge_prob)
        e2 = _random_edges(rng, n2, edge_prob)
        if not (_connected(n1, e1) and _connected(n2, e2)):
            continue
        # Sub-grid buses 0,1 become the shared pair; they must not be
        # adjacent inside either sub-grid.
        if any({u, v} == {0, 1} for u, v in e1 + e2):
            continue
        s, t = 0, 1
        # Global indexing: s=0, t=1, then the interiors of each side.
        remap2 = {0: s, 1: t}
        for b in range(2, n2):
            remap2[b] = n1 + (b - 2)
        lines: list[Line] = []
        for u, v in e1:
            lines.append(Line(len(lines), u, v, float(rng.uniform(*_B_RANGE))))
        for u, v in e2:
            lines.append(
                Line(len(lines), remap2[u], remap2[v], float(rng.uniform(*_B_RANGE)))
            )
        net = NetworkModel(n1 + n2 - 2, lines)
        g1 = frozenset(range(n1))
        g2 = frozenset({s, t} | set(range(n1, n1 + n2 - 2)))
        return TwoBusJoint(net, g1, g2, s, t)
