"""Independent AC power-flow reference for tests and fixture generation.

Solves the bus power-balance equations in rectangular voltage coordinates
with MINPACK's hybrid root finder (finite-difference Jacobian), sharing no
formulation, coordinates, or linear algebra with the package's polar
Newton solver.  Admittances are assembled with explicit Python loops.
"""

from __future__ import annotations

import numpy as np
import scipy.optimize

PQ, PV, SLACK = 1, 2, 3


def ybus_by_loops(case) -> np.ndarray:
    n = case.n_buses
    Y = np.zeros((n, n), dtype=complex)
    for k in range(case.n_branches):
        if not case.br_status[k]:
            continue
        i, j = int(case.br_from[k]), int(case.br_to[k])
        ys = 1.0 / complex(case.br_r[k], case.br_x[k])
        bc = 0.5j * case.br_charge[k]
        tap = case.br_tap[k] if case.br_tap[k] != 0.0 else 1.0
        t = tap * np.exp(1j * case.br_shift[k])
        Y[i, i] += (ys + bc) / (tap * tap)
        Y[i, j] += -ys / np.conj(t)
        Y[j, i] += -ys / t
        Y[j, j] += ys + bc
    for i in range(n):
        Y[i, i] += complex(case.shunt_g[i], case.shunt_b[i])
    return Y


def solve_rectangular(case, tol: float = 1e-10):
    """Voltage solution as (vm, va); raises RuntimeError on failure."""
    n = case.n_buses
    Y = ybus_by_loops(case)
    slack = int(np.flatnonzero(case.bus_type == SLACK)[0])
    free = [i for i in range(n) if i != slack]

    def unpack(x):
        V = np.empty(n, dtype=complex)
        V[slack] = case.v_set[slack]
        V[free] = x[: len(free)] + 1j * x[len(free) :]
        return V

    def residuals(x):
        V = unpack(x)
        S = V * np.conj(Y @ V)
        out = []
        for i in free:
            out.append(S[i].real - case.p_inj[i])
        for i in free:
            if case.bus_type[i] == PQ:
                out.append(S[i].imag - case.q_inj[i])
            else:
                out.append(abs(V[i]) ** 2 - case.v_set[i] ** 2)
        return np.array(out)

    e0 = np.where(case.bus_type != PQ, case.v_set, 1.0)
    x0 = np.concatenate([e0[free], np.zeros(len(free))])
    sol = scipy.optimize.root(residuals, x0, method="hybr", tol=tol)
    worst = np.abs(residuals(sol.x)).max()
    if worst > 1e-8:
        raise RuntimeError(f"rectangular solve failed: residual {worst:.3e}")
    V = unpack(sol.x)
    va = np.angle(V) - np.angle(V[slack])
    return np.abs(V), va


def from_end_flows_by_loops(case, vm, va):
    """(P_from, Q_from) per branch in per-unit; zeros for open branches."""
    V = vm * np.exp(1j * va)
    p = np.zeros(case.n_branches)
    q = np.zeros(case.n_branches)
    for k in range(case.n_branches):
        if not case.br_status[k]:
            continue
        i, j = int(case.br_from[k]), int(case.br_to[k])
        ys = 1.0 / complex(case.br_r[k], case.br_x[k])
        bc = 0.5j * case.br_charge[k]
        tap = case.br_tap[k] if case.br_tap[k] != 0.0 else 1.0
        t = tap * np.exp(1j * case.br_shift[k])
        i_from = ((ys + bc) / (tap * tap)) * V[i] + (-ys / np.conj(t)) * V[j]
        s = V[i] * np.conj(i_from)
        p[k], q[k] = s.real, s.imag
    return p, q
