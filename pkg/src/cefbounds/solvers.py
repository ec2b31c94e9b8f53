"""Thin deterministic wrappers around the LP/QP solvers.

LPs go through scipy's HiGHS interface. Weighted least-squares QPs go
through CLARABEL and are then polished by re-solving the KKT system of the
active set, which recovers ~1e-11 accuracy from the interior-point answer.
"""

from __future__ import annotations

import numpy as np
import scipy.optimize

from .core import InfeasibleError

# Feasibility slack used both when picking active constraints and when
# accepting a polished point.
_ACTIVE_TOL = 1e-7
_FEAS_TOL = 1e-9


def solve_lp(c, A_ub, b_ub, lb, ub, maximize=False):
    """Solve min/max c@x subject to A_ub@x <= b_ub and lb <= x <= ub.

    Returns (x, value) with value on the original (unnegated) objective.
    """
    c = np.asarray(c, dtype=float)
    obj = -c if maximize else c
    bounds = np.column_stack([lb, ub])
    res = scipy.optimize.linprog(
        obj, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs"
    )
    if res.status == 2:
        raise InfeasibleError("linear program infeasible: " + res.message)
    if not res.success:
        raise InfeasibleError(f"LP solver failure (status {res.status}): {res.message}")
    value = float(c @ res.x)
    return res.x, value


def _weighted_lsq_objective(M, w, r, x):
    resid = M @ x - r
    return float(np.sum(w * resid * resid))


def _kkt_polish(M, w, r, G, h, lb, ub, x0):
    """Re-solve the QP restricted to the constraints active at x0.

    The equality-constrained problem min (Mx-r)'W(Mx-r) s.t. Ex = e has the
    KKT system [[H, E'], [E, 0]] [x; lam] = [M'Wr*2; e]; lstsq handles the
    (often singular) system. Returns None when the polished point is not
    feasible or not an improvement.
    """
    n = x0.size
    H = 2.0 * (M.T * w) @ M
    g = -2.0 * (M.T * w) @ r

    rows = []
    rhs = []
    if G is not None and G.size:
        slack = h - G @ x0
        for i in np.flatnonzero(slack <= _ACTIVE_TOL):
            rows.append(G[i])
            rhs.append(h[i])
    span = max(np.max(ub - lb), 1.0)
    for i in range(n):
        if x0[i] - lb[i] <= _ACTIVE_TOL * span:
            e = np.zeros(n)
            e[i] = 1.0
            rows.append(e)
            rhs.append(lb[i])
        elif ub[i] - x0[i] <= _ACTIVE_TOL * span:
            e = np.zeros(n)
            e[i] = 1.0
            rows.append(e)
            rhs.append(ub[i])

    if rows:
        E = np.vstack(rows)
        e = np.asarray(rhs)
        m = E.shape[0]
        kkt = np.block([[H, E.T], [E, np.zeros((m, m))]])
        target = np.concatenate([-g, e])
    else:
        kkt = H
        target = -g
    sol, *_ = np.linalg.lstsq(kkt, target, rcond=None)
    x = sol[:n]

    x = np.clip(x, lb, ub)
    if G is not None and G.size and np.any(G @ x - h > _FEAS_TOL):
        return None
    if _weighted_lsq_objective(M, w, r, x) > _weighted_lsq_objective(M, w, r, x0) + 1e-15:
        return None
    return x


def solve_weighted_lsq_qp(M, w, r, G, h, lb, ub):
    """Minimize sum_k w_k * ((M@x - r)_k)^2 s.t. G@x <= h, lb <= x <= ub.

    Returns (x, objective). Raises InfeasibleError when the solver reports
    an infeasible program (cannot happen for the constraint sets built in
    this package, since constants are always feasible, but kept as a guard).
    """
    import cvxpy as cp

    n = lb.size
    x = cp.Variable(n)
    resid = M @ x - r
    objective = cp.Minimize(cp.sum(cp.multiply(w, cp.square(resid))))
    constraints = [x >= lb, x <= ub]
    if G is not None and G.size:
        constraints.append(G @ x <= h)
    prob = cp.Problem(objective, constraints)
    prob.solve(solver=cp.CLARABEL)
    if prob.status in ("infeasible", "infeasible_inaccurate"):
        raise InfeasibleError("quadratic program infeasible")
    if x.value is None:
        raise InfeasibleError(f"QP solver failure: status {prob.status}")

    x0 = np.clip(np.asarray(x.value, dtype=float), lb, ub)
    polished = _kkt_polish(M, w, r, G, h, lb, ub, x0)
    best = polished if polished is not None else x0
    return best, _weighted_lsq_objective(M, w, r, best)
