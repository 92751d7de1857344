"""Full AC power flow (polar Newton iteration) and empirical AC outage factors.

The solver uses the standard bus-injection model: PQ buses fix P and Q, PV
buses fix P and voltage magnitude, and a single slack bus absorbs the
imbalance and anchors the angle reference.  Generator reactive limits are
deliberately not enforced (no PV/PQ switching): outage factors are defined
against fixed injections, and limit switching would change what is being
measured.

AC outage factors have no closed form, so they are computed from the
definition: re-solve the depleted case with unchanged injections and take
the flow change on the monitored branch over the pre-outage flow on the
tripped branch, both measured as from-end real power.  Contingency solves
warm-start from the base state and fall back to a flat start before giving
up.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import (
    BridgeOutageError,
    NetworkError,
    PowerFlowError,
)
from .netmodel import NetworkModel

__all__ = [
    "ACCase",
    "ACState",
    "BranchFlows",
    "ACLodfValue",
    "solve_ac",
    "ac_branch_flow",
    "ac_lodf",
    "ac_outage_flows",
    "mismatch_norm",
]

PQ, PV, SLACK = 1, 2, 3


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.asarray(arr, dtype=dtype).copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ACCase:
    """Immutable AC network data in per-unit on a common MVA base.

    Branch arrays are aligned; ``branch_ids`` carries stable identifiers
    (case-file row numbers) that survive edits.  ``tap`` of zero means a
    plain line (ratio one); ``shift`` is in radians.
    """

    base_mva: float
    bus_type: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    v_set: np.ndarray
    shunt_g: np.ndarray
    shunt_b: np.ndarray
    br_from: np.ndarray
    br_to: np.ndarray
    br_r: np.ndarray
    br_x: np.ndarray
    br_charge: np.ndarray
    br_tap: np.ndarray
    br_shift: np.ndarray
    br_status: np.ndarray
    bus_labels: tuple = ()
    branch_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "bus_type", _frozen(self.bus_type, int))
        for name in (
            "p_inj", "q_inj", "v_set", "shunt_g", "shunt_b",
            "br_r", "br_x", "br_charge", "br_tap", "br_shift",
        ):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "br_from", _frozen(self.br_from, int))
        object.__setattr__(self, "br_to", _frozen(self.br_to, int))
        object.__setattr__(self, "br_status", _frozen(self.br_status, bool))
        if not self.bus_labels:
            object.__setattr__(self, "bus_labels", tuple(range(self.n_buses)))
        if not self.branch_ids:
            object.__setattr__(self, "branch_ids", tuple(range(self.n_branches)))
        n_slack = int((self.bus_type == SLACK).sum())
        if n_slack != 1:
            raise NetworkError(f"case must have exactly one slack bus, got {n_slack}")
        if np.any(self.br_from == self.br_to):
            raise NetworkError("branch with identical endpoints")
        live = self.br_status
        if np.any(self.br_x[live] == 0.0):
            raise NetworkError("in-service branch with zero reactance")

    @property
    def n_buses(self) -> int:
        return len(self.bus_type)

    @property
    def n_branches(self) -> int:
        return len(self.br_from)

    @cached_property
    def slack_bus(self) -> int:
        return int(np.flatnonzero(self.bus_type == SLACK)[0])

    def branch_index(self, branch_id: int) -> int:
        try:
            return self.branch_ids.index(branch_id)
        except ValueError:
            raise NetworkError(f"unknown branch id {branch_id}") from None

    # -- edits ---------------------------------------------------------------

    def without_branches(self, branch_ids) -> "ACCase":
        """Copy with the given branches switched out of service."""
        status = self.br_status.copy()
        for bid in branch_ids:
            status[self.branch_index(bid)] = False
        return replace(self, br_status=status)

    def with_branch(
        self, from_bus: int, to_bus: int, x: float, r: float = 0.0
    ) -> "ACCase":
        """Copy with one extra plain (untapped, uncharged) branch in service."""
        new_id = max(self.branch_ids, default=-1) + 1
        return replace(
            self,
            br_from=np.append(self.br_from, from_bus),
            br_to=np.append(self.br_to, to_bus),
            br_r=np.append(self.br_r, r),
            br_x=np.append(self.br_x, x),
            br_charge=np.append(self.br_charge, 0.0),
            br_tap=np.append(self.br_tap, 0.0),
            br_shift=np.append(self.br_shift, 0.0),
            br_status=np.append(self.br_status, True),
            branch_ids=self.branch_ids + (new_id,),
        )

    def with_scaled_injections(self, factor: float) -> "ACCase":
        """Copy with all P and Q injections multiplied by ``factor``."""
        return replace(
            self, p_inj=self.p_inj * factor, q_inj=self.q_inj * factor
        )

    def as_dc_limit(self) -> "ACCase":
        """Idealized copy whose small-signal limit is the susceptance model.

        Drops resistance, line charging, bus shunts, off-nominal taps and
        phase shifts, and flattens voltage setpoints to one, leaving a pure
        reactance network weighted exactly like the linear flow model.
        """
        return replace(
            self,
            br_r=np.zeros(self.n_branches),
            br_charge=np.zeros(self.n_branches),
            br_tap=np.zeros(self.n_branches),
            br_shift=np.zeros(self.n_branches),
            shunt_g=np.zeros(self.n_buses),
            shunt_b=np.zeros(self.n_buses),
            v_set=np.ones(self.n_buses),
        )

    # -- derived structure ----------------------------------------------------

    def live_graph(self) -> NetworkModel:
        """Topology of in-service branches (weights 1/|x|), for bridge tests."""
        from .netmodel import Line

        lines = [
            Line(self.branch_ids[k], int(self.br_from[k]), int(self.br_to[k]),
                 1.0 / abs(self.br_x[k]))
            for k in range(self.n_branches)
            if self.br_status[k]
        ]
        return NetworkModel(self.n_buses, lines, self.bus_labels)


@dataclass(frozen=True)
class ACState:
    """Converged voltage solution: per-bus magnitude and angle (radians)."""

    vm: np.ndarray
    va: np.ndarray
    iterations: int = 0
    max_mismatch: float = np.nan

    def __post_init__(self):
        object.__setattr__(self, "vm", _frozen(self.vm))
        object.__setattr__(self, "va", _frozen(self.va))

    @property
    def voltage(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.va)


@dataclass(frozen=True)
class BranchFlows:
    """Complex per-branch power at both ends (per-unit, into the branch)."""

    s_from: np.ndarray
    s_to: np.ndarray

    @property
    def p_from(self) -> np.ndarray:
        return self.s_from.real

    @property
    def losses(self) -> np.ndarray:
        return self.s_from + self.s_to


@dataclass(frozen=True)
class ACLodfValue:
    monitored: int
    tripped: int
    value: float
    tripped_flow: float


def _branch_admittances(case: ACCase):
    """Per-branch two-port admittances; zero rows for open branches."""
    live = case.br_status
    with np.errstate(divide="ignore", invalid="ignore"):
        ys = np.where(live, 1.0, 0.0) / np.where(
            live, case.br_r + 1j * case.br_x, 1.0
        )
    tap = np.where(case.br_tap == 0.0, 1.0, case.br_tap)
    t = tap * np.exp(1j * case.br_shift)
    bc = 1j * case.br_charge / 2.0 * live
    yff = (ys + bc) / (tap * tap)
    yft = -ys / np.conj(t)
    ytf = -ys / t
    ytt = ys + bc
    return yff, yft, ytf, ytt


def build_ybus(case: ACCase) -> np.ndarray:
    """Dense bus admittance matrix including bus shunts."""
    n = case.n_buses
    yff, yft, ytf, ytt = _branch_admittances(case)
    Y = np.zeros((n, n), dtype=complex)
    f, t = case.br_from, case.br_to
    np.add.at(Y, (f, f), yff)
    np.add.at(Y, (f, t), yft)
    np.add.at(Y, (t, f), ytf)
    np.add.at(Y, (t, t), ytt)
    Y[np.diag_indices(n)] += case.shunt_g + 1j * case.shunt_b
    return Y


def _power_mismatch(case: ACCase, Y: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Stacked P mismatch at non-slack buses and Q mismatch at PQ buses."""
    S = V * np.conj(Y @ V)
    dS = S - (case.p_inj + 1j * case.q_inj)
    pvpq = np.flatnonzero(case.bus_type != SLACK)
    pq = np.flatnonzero(case.bus_type == PQ)
    return np.concatenate([dS.real[pvpq], dS.imag[pq]])


def mismatch_norm(case: ACCase, state: ACState) -> float:
    """Max-norm power mismatch of a state, re-evaluated from scratch."""
    return float(
        np.abs(_power_mismatch(case, build_ybus(case), state.voltage)).max()
    )


def solve_ac(
    case: ACCase,
    start: ACState | None = None,
    tol: float = 1e-8,
    max_iter: int = 30,
) -> ACState:
    """Solve the AC power-flow equations by full Newton iteration in polar
    coordinates.

    Magnitudes at PV and slack buses are pinned to their setpoints and the
    slack angle to zero.  Returns a state whose re-evaluated power mismatch
    is below ``tol`` (max-norm, per-unit); raises
    :class:`~gridfence.errors.PowerFlowError` if the iteration cap is hit
    or the Jacobian becomes singular.
    """
    n = case.n_buses
    pvpq = np.flatnonzero(case.bus_type != SLACK)
    pq = np.flatnonzero(case.bus_type == PQ)
    fixed_vm = case.bus_type != PQ

    if start is not None:
        vm = start.vm.copy()
        va = start.va.copy()
    else:
        vm = np.ones(n)
        va = np.zeros(n)
    vm[fixed_vm] = case.v_set[fixed_vm]
    va -= va[case.slack_bus]

    Y = build_ybus(case)
    Sspec = case.p_inj + 1j * case.q_inj
    npq = len(pq)

    for iteration in range(max_iter + 1):
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        dS = S - Sspec
        F = np.concatenate([dS.real[pvpq], dS.imag[pq]])
        worst = float(np.abs(F).max()) if len(F) else 0.0
        if worst < tol:
            return ACState(vm, va, iterations=iteration, max_mismatch=worst)
        if iteration == max_iter:
            break

        Ibus = Y @ V
        diagV = np.diag(V)
        diagVnorm = np.diag(V / np.abs(V))
        dS_dVa = 1j * diagV @ np.conj(np.diag(Ibus) - Y @ diagV)
        dS_dVm = diagV @ np.conj(Y @ diagVnorm) + np.conj(np.diag(Ibus)) @ diagVnorm
        J = np.block(
            [
                [dS_dVa[np.ix_(pvpq, pvpq)].real, dS_dVm[np.ix_(pvpq, pq)].real],
                [dS_dVa[np.ix_(pq, pvpq)].imag, dS_dVm[np.ix_(pq, pq)].imag],
            ]
        )
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError(f"singular Jacobian at iteration {iteration}") from exc
        va[pvpq] += dx[: len(pvpq)]
        if npq:
            vm[pq] += dx[len(pvpq) :]
            if np.any(vm[pq] <= 0):
                raise PowerFlowError(
                    f"voltage collapse (non-positive magnitude) at iteration {iteration}"
                )

    raise PowerFlowError(
        f"no convergence after {max_iter} iterations (mismatch {worst:.3e})"
    )


def ac_branch_flow(case: ACCase, state: ACState) -> BranchFlows:
    """Complex power entering each branch at both ends; zero when open."""
    yff, yft, ytf, ytt = _branch_admittances(case)
    V = state.voltage
    Vf = V[case.br_from]
    Vt = V[case.br_to]
    s_from = Vf * np.conj(yff * Vf + yft * Vt)
    s_to = Vt * np.conj(ytf * Vf + ytt * Vt)
    return BranchFlows(s_from, s_to)


def _solve_contingency(
    case: ACCase, base_state: ACState | None, tol: float, max_iter: int
) -> ACState:
    """Warm-started solve with a flat-start retry."""
    if base_state is not None:
        try:
            return solve_ac(case, start=base_state, tol=tol, max_iter=max_iter)
        except PowerFlowError:
            pass
    return solve_ac(case, start=None, tol=tol, max_iter=max_iter)


def ac_outage_flows(
    case: ACCase,
    base_state: ACState,
    tripped_id: int,
    tol: float = 1e-8,
    max_iter: int = 30,
) -> tuple[BranchFlows, ACState]:
    """Post-outage branch flows with injections held at their base values.

    Refuses bridges (the islanded case has no meaning under fixed
    injections); raises :class:`PowerFlowError` when neither the warm nor
    the flat start converges.
    """
    if case.live_graph().is_bridge(tripped_id):
        raise BridgeOutageError(
            f"branch {tripped_id} is a bridge; its outage islands the network"
        )
    depleted = case.without_branches([tripped_id])
    state = _solve_contingency(depleted, base_state, tol, max_iter)
    return ac_branch_flow(depleted, state), state


def ac_lodf(
    case: ACCase,
    base_state: ACState,
    monitored_id: int,
    tripped_id: int,
    flow_threshold: float = 1e-3,
) -> ACLodfValue:
    """Empirical outage factor under the AC model.

    Flow means from-end real power.  The pre-outage flow on the tripped
    branch must exceed ``flow_threshold`` (per-unit) for the ratio to be
    meaningful.
    """
    if monitored_id == tripped_id:
        raise NetworkError("monitored and tripped branch coincide")
    km = case.branch_index(monitored_id)
    kt = case.branch_index(tripped_id)
    pre = ac_branch_flow(case, base_state)
    f_tripped = float(pre.p_from[kt])
    if abs(f_tripped) <= flow_threshold:
        raise NetworkError(
            f"pre-outage flow {f_tripped:.2e} on branch {tripped_id} is below "
            f"the {flow_threshold} threshold"
        )
    post, _ = ac_outage_flows(case, base_state, tripped_id)
    value = float((post.p_from[km] - pre.p_from[km]) / f_tripped)
    return ACLodfValue(monitored_id, tripped_id, value, f_tripped)
