"""DC power-flow sensitivities on a susceptance-weighted network.

The linearized flow model determines line flows from balanced bus
injections through the weighted Laplacian pseudoinverse.  Rather than a
full SVD, one reference bus is grounded: the reduced Laplacian is factored
once per network (Cholesky) and reused across every query, which makes
all-pairs sweeps cheap.  Because queries only ever involve differences of
bus indicator vectors, grounding and the true pseudoinverse agree exactly.

Provided sensitivities:

* transfer factors (flow change on a line per unit power moved between a
  bus pair),
* outage factors (flow change on a surviving line per unit pre-outage flow
  on a tripped line), including the multi-line generalization,
* effective susceptance of a bus pair (single-line equivalent of the whole
  network between them),
* the two-factor product decomposition across a two-bus boundary, and
* the rational susceptance response |D|(b) = t1*b / (t2*b + t3) of a
  transfer factor in one line's susceptance.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from collections.abc import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    BridgeDetectionError,
    BridgeOutageError,
    DisconnectedNetworkError,
    FitResidualError,
    IslandingError,
    NetworkError,
    SameLineError,
)
from .netmodel import NetworkModel

__all__ = [
    "DcSensitivity",
    "RationalCoefficients",
    "laplacian_pinv_apply",
    "dc_flow",
    "ptdf",
    "lodf",
    "gen_lodf",
    "effective_susceptance",
    "decompose_ptdf",
    "ptdf_rational_fit",
]

#: |1 - self-transfer| below this marks a tripped line as an island-maker.
BRIDGE_DENOMINATOR_TOL = 1e-8

#: Default tolerance on injection balance (fraction of total |p|).
BALANCE_TOL = 1e-9


class DcSensitivity:
    """Factorized sensitivity engine for one immutable network.

    The factorization is computed once in the constructor and never
    mutated, so a single engine can serve any number of concurrent readers.
    """

    def __init__(self, net: NetworkModel, reference_bus: int = 0):
        if not net.is_connected:
            raise DisconnectedNetworkError(
                f"network has {len(net.components)} components; sensitivities "
                "need a connected network"
            )
        if not (0 <= reference_bus < net.n_buses):
            raise NetworkError(f"reference bus {reference_bus} out of range")
        self.net = net
        self.reference_bus = reference_bus
        self._mask = np.ones(net.n_buses, dtype=bool)
        self._mask[reference_bus] = False
        reduced = net.laplacian[np.ix_(self._mask, self._mask)]
        self._factor = scipy.linalg.cho_factor(reduced)

    # -- solves --------------------------------------------------------------

    def _solve_grounded(self, rhs_reduced: np.ndarray) -> np.ndarray:
        """Angles with the reference entry fixed to zero."""
        theta = np.zeros(
            (self.net.n_buses,) + rhs_reduced.shape[1:], dtype=float
        )
        theta[self._mask] = scipy.linalg.cho_solve(self._factor, rhs_reduced)
        return theta

    def pinv_apply(self, v: Sequence[float]) -> np.ndarray:
        """Apply the Laplacian pseudoinverse to a vector.

        The component of ``v`` along the all-ones vector is projected out
        first (the pseudoinverse annihilates it anyway), so unbalanced
        inputs are handled by treating them as their balanced part.
        """
        v = np.asarray(v, dtype=float)
        if v.shape != (self.net.n_buses,):
            raise NetworkError(
                f"vector length {v.shape} does not match {self.net.n_buses} buses"
            )
        v = v - v.mean()
        theta = self._solve_grounded(v[self._mask])
        return theta - theta.mean()

    def flows(self, injections: Sequence[float], balance_tol: float = BALANCE_TOL) -> np.ndarray:
        """Per-line flows for balanced injections.

        Raises if the injections do not sum to zero within ``balance_tol``
        relative to the total injected magnitude.
        """
        p = np.asarray(injections, dtype=float)
        if p.shape != (self.net.n_buses,):
            raise NetworkError(
                f"injection length {p.shape} does not match {self.net.n_buses} buses"
            )
        scale = max(np.abs(p).sum(), 1.0)
        if abs(p.sum()) > balance_tol * scale:
            raise NetworkError(
                f"injections sum to {p.sum():.3e}; must balance to zero"
            )
        theta = self._solve_grounded(p[self._mask])
        return self.net.susceptances * (self.net.incidence.T @ theta)

    # -- pairwise sensitivities ------------------------------------------------

    @cached_property
    def _angle_transfer(self) -> np.ndarray:
        """m-by-m matrix of (e_i - e_j)^T L^+ (e_k - e_l) over line pairs.

        Column line (k,l) is the injected pair, row line (i,j) the observed
        angle difference.  Computed with one triangular solve per line.
        """
        U = self.net.incidence[self._mask, :]
        X = scipy.linalg.cho_solve(self._factor, U)
        return U.T @ X

    @cached_property
    def ptdf_matrix(self) -> np.ndarray:
        """Line-by-line transfer matrix D[e, k]: flow change on line e per
        unit injection across line k's endpoint pair."""
        D = self.net.susceptances[:, None] * self._angle_transfer
        D.setflags(write=False)
        return D

    @cached_property
    def _numeric_bridges(self) -> np.ndarray:
        """Boolean per-line mask where 1 - D[k,k] vanishes numerically."""
        return np.abs(1.0 - np.diag(self.ptdf_matrix)) < BRIDGE_DENOMINATOR_TOL

    def _check_bridge_consistency(self, line_id: int) -> bool:
        """True iff the line is a bridge, with numeric/structural agreement."""
        k = self.net.line_index(line_id)
        numeric = bool(self._numeric_bridges[k])
        structural = self.net.is_bridge(line_id)
        if numeric != structural:
            raise BridgeDetectionError(
                f"line {line_id}: numeric island test ({numeric}) and graph "
                f"bridge test ({structural}) disagree"
            )
        return structural

    def ptdf(self, line_id: int, source: int, sink: int) -> float:
        """Flow change on a line per unit power moved from source to sink.

        Signed relative to the line's stored orientation; always within
        [-1, 1].  A coincident pair returns exactly 0.
        """
        k = self.net.line_index(line_id)
        self.net._check_bus(source)
        self.net._check_bus(sink)
        if source == sink:
            return 0.0
        u = np.zeros(self.net.n_buses)
        u[source] = 1.0
        u[sink] = -1.0
        theta = self._solve_grounded(u[self._mask])
        ln = self.net.line(line_id)
        return float(ln.susceptance * (theta[ln.src] - theta[ln.dst]))

    def lodf(self, monitored_id: int, tripped_id: int) -> float:
        """Outage factor: flow change on the monitored line per unit
        pre-outage flow on the tripped line.

        Computed from the pre-outage transfer matrix; undefined (raises)
        when the tripped line is a bridge, since its outage islands the
        network instead of redistributing flow.
        """
        if monitored_id == tripped_id:
            raise SameLineError(f"monitored and tripped line are both {monitored_id}")
        km = self.net.line_index(monitored_id)
        kt = self.net.line_index(tripped_id)
        if self._check_bridge_consistency(tripped_id):
            raise BridgeOutageError(
                f"line {tripped_id} is a bridge; outage factor undefined"
            )
        D = self.ptdf_matrix
        return float(D[km, kt] / (1.0 - D[kt, kt]))

    def lodf_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """All-pairs outage factors K[monitored, tripped] plus bridge mask.

        Bridge columns and the diagonal are NaN.  Raises if the numeric and
        structural bridge tests disagree on any line.
        """
        D = self.ptdf_matrix
        m = self.net.n_lines
        numeric = self._numeric_bridges
        structural = np.array(
            [self.net.is_bridge(ln.id) for ln in self.net.lines]
        )
        if (numeric != structural).any():
            bad = [
                self.net.lines[k].id for k in np.flatnonzero(numeric != structural)
            ]
            raise BridgeDetectionError(
                f"numeric island test and graph bridge test disagree on lines {bad}"
            )
        den = 1.0 - np.diag(D)
        K = np.full((m, m), np.nan)
        ok = ~structural
        K[:, ok] = D[:, ok] / den[ok]
        np.fill_diagonal(K, np.nan)
        return K, structural

    def effective_susceptance(self, i: int, j: int) -> float:
        """Single-line equivalent susceptance of the network between i, j."""
        self.net._check_bus(i)
        self.net._check_bus(j)
        if i == j:
            raise NetworkError("effective susceptance needs two distinct buses")
        u = np.zeros(self.net.n_buses)
        u[i] = 1.0
        u[j] = -1.0
        theta = self._solve_grounded(u[self._mask])
        return float(1.0 / (theta[i] - theta[j]))


# -- one-shot functional wrappers ---------------------------------------------


def laplacian_pinv_apply(net: NetworkModel, v: Sequence[float]) -> np.ndarray:
    return DcSensitivity(net).pinv_apply(v)


def dc_flow(net: NetworkModel, injections: Sequence[float]) -> np.ndarray:
    return DcSensitivity(net).flows(injections)


def ptdf(net: NetworkModel, line_id: int, source: int, sink: int) -> float:
    return DcSensitivity(net).ptdf(line_id, source, sink)


def lodf(net: NetworkModel, monitored_id: int, tripped_id: int) -> float:
    return DcSensitivity(net).lodf(monitored_id, tripped_id)


def effective_susceptance(net: NetworkModel, i: int, j: int) -> float:
    return DcSensitivity(net).effective_susceptance(i, j)


def gen_lodf(
    net: NetworkModel,
    monitored_id: int,
    tripped_ids: Iterable[int],
    reference_id: int,
) -> float:
    """Multi-outage factor: sensitivity of the monitored line's flow to the
    pre-outage flow on one reference line of a simultaneously tripped set.

    Equals the transfer factor of the monitored line for the reference
    line's endpoint pair, evaluated on the depleted network.  A singleton
    set reduces to the ordinary outage factor and shares its code path.
    """
    tripped = set(tripped_ids)
    if reference_id not in tripped:
        raise NetworkError(f"reference line {reference_id} not in the tripped set")
    if monitored_id in tripped:
        raise SameLineError(f"monitored line {monitored_id} is in the tripped set")
    for lid in tripped:
        net.line(lid)
    if len(tripped) == 1:
        return lodf(net, monitored_id, reference_id)
    depleted = net.remove_lines(tripped)
    if not depleted.is_connected:
        raise IslandingError(
            f"removing lines {sorted(tripped)} disconnects the network"
        )
    ref = net.line(reference_id)
    return DcSensitivity(depleted).ptdf(monitored_id, ref.src, ref.dst)


def decompose_ptdf(
    net: NetworkModel,
    g1_buses: Iterable[int],
    g2_buses: Iterable[int],
    monitored_id: int,
    pair: tuple[int, int],
) -> tuple[float, float, float]:
    """Two-factor form of a transfer factor across a two-bus boundary.

    The network must split into two sub-grids sharing exactly two buses
    ``s, t`` and no lines; the monitored line lives in the second sub-grid
    and the injected pair in the first.  The far sub-grid collapses to a
    single equivalent line from ``s`` to ``t`` carrying its effective
    susceptance, giving

        whole = (transfer onto the equivalent line inside sub-grid 1)
              * (transfer onto the monitored line inside sub-grid 2)

    Returns ``(factor1, factor2, factor1 * factor2)``.  Lines joining
    ``s`` and ``t`` directly are assigned to sub-grid 2.
    """
    g1 = frozenset(g1_buses)
    g2 = frozenset(g2_buses)
    overlap = g1 & g2
    if len(overlap) != 2:
        raise NetworkError(
            f"sub-grid bus sets must overlap in exactly 2 buses, got {len(overlap)}"
        )
    if g1 | g2 != frozenset(range(net.n_buses)):
        raise NetworkError("sub-grid bus sets must cover every bus")
    s, t = sorted(overlap)
    lines1, lines2 = [], []
    for ln in net.lines:
        ends = {ln.src, ln.dst}
        if ends <= overlap:
            lines2.append(ln.id)
        elif ends <= g1:
            lines1.append(ln.id)
        elif ends <= g2:
            lines2.append(ln.id)
        else:
            raise NetworkError(
                f"line {ln.id} crosses the boundary outside the shared buses"
            )
    monitor = net.line(monitored_id)
    if monitored_id not in lines2:
        raise NetworkError(
            f"monitored line {monitored_id} is not in the second sub-grid"
        )
    src_bus, sink_bus = pair
    if not (src_bus in g1 and sink_bus in g1):
        raise NetworkError(f"injection pair {pair} is not in the first sub-grid")

    sub2, map2 = net.induced_subnetwork(g2)
    sub2 = sub2.remove_lines(set(sub2.line_ids) - set(lines2))
    eng2 = DcSensitivity(sub2)
    b_equiv = eng2.effective_susceptance(map2[s], map2[t])
    factor2 = eng2.ptdf(monitored_id, map2[s], map2[t])

    sub1, map1 = net.induced_subnetwork(g1)
    sub1 = sub1.remove_lines(set(sub1.line_ids) - set(lines1))
    fict_id = max(net.line_ids, default=-1) + 1
    augmented = sub1.add_line(map1[s], map1[t], b_equiv, line_id=fict_id)
    factor1 = DcSensitivity(augmented).ptdf(
        fict_id, map1[src_bus], map1[sink_bus]
    )
    return factor1, factor2, factor1 * factor2


@dataclass(frozen=True)
class RationalCoefficients:
    """Coefficients of |D|(b) = t1*b / (t2*b + t3), scaled so t2 = 1.

    ``t3 == 0`` exactly when the line is a bridge (its transfer factor does
    not depend on the susceptance at all).
    """

    t1: float
    t2: float
    t3: float

    def evaluate(self, b: float) -> float:
        return self.t1 * b / (self.t2 * b + self.t3)

    @property
    def bridge_like(self) -> bool:
        return self.t3 == 0.0


#: Susceptance multipliers used to sample the rational response.
_FIT_SAMPLES = (0.5, 1.0, 2.0, 4.0)
_FIT_HOLDOUT = 0.25
_FIT_TOL = 1e-7


def ptdf_rational_fit(
    net: NetworkModel,
    line_id: int,
    pair: tuple[int, int],
) -> RationalCoefficients:
    """Fit the transfer factor's rational response in one line's susceptance.

    Samples |D| at four susceptance multiples of the stored value, solves
    the two-ratio linear system, and validates the fit on a held-out
    sample; a residual above tolerance indicates the rational model was
    violated, which means a bug.
    """
    source, sink = pair
    b0 = net.line(line_id).susceptance
    bs = np.array([f * b0 for f in _FIT_SAMPLES])

    def sample(b: float) -> float:
        eng = DcSensitivity(net.replace_susceptance(line_id, b))
        return abs(eng.ptdf(line_id, source, sink))

    d = np.array([sample(b) for b in bs])

    if net.is_bridge(line_id):
        # Flat response: either every transfer crosses the line or none
        # does, so the level is structurally 0 or 1; snap off float noise.
        if np.ptp(d) > 1e-9:
            raise FitResidualError(
                f"bridge line {line_id} has non-constant transfer response"
            )
        level = float(d.mean())
        if level < 1e-9:
            level = 0.0
        elif abs(level - 1.0) < 1e-9:
            level = 1.0
        coeffs = RationalCoefficients(level, 1.0, 0.0)
    elif np.all(d < 1e-12):
        # Identically-zero transfer: the denominator ratios are unobservable.
        coeffs = RationalCoefficients(0.0, 1.0, 1.0)
    else:
        # With t1 := 1, each sample gives  d*b*t2 + d*t3 = b.
        A = np.column_stack([d * bs, d])
        sol, *_ = np.linalg.lstsq(A, bs, rcond=None)
        t2, t3 = (max(float(x), 0.0) for x in sol)
        if t2 <= 0:
            raise FitResidualError(f"line {line_id}: non-positive through ratio")
        coeffs = RationalCoefficients(1.0 / t2, 1.0, t3 / t2)

    b_hold = _FIT_HOLDOUT * b0
    measured = sample(b_hold)
    predicted = coeffs.evaluate(b_hold)
    if abs(measured - predicted) > _FIT_TOL:
        raise FitResidualError(
            f"line {line_id}: held-out residual {abs(measured - predicted):.3e} "
            f"exceeds {_FIT_TOL}"
        )
    return coeffs
