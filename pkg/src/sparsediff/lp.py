"""Dense two-phase primal simplex (Bland's rule) and the l1-minimization LP built on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LPResult", "simplex", "lp_min_l1", "InfeasibleLP"]


class InfeasibleLP(RuntimeError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    status: str          # "converged" | "infeasible_lp"
    pivots: int
    basis: np.ndarray


def _pivot(t, row, col):
    t[row] /= t[row, col]
    colv = t[:, col].copy()
    colv[row] = 0.0
    t -= np.outer(colv, t[row])


def _run(t, basis, n_cols, tol, max_pivots):
    """Minimize with the last row of ``t`` holding reduced costs (objective value in ``t[-1, -1]`` negated)."""
    pivots = 0
    m = t.shape[0] - 1
    while True:
        red = t[-1, :n_cols]
        cands = np.flatnonzero(red < -tol)
        if cands.size == 0:
            return pivots
        col = int(cands[0])
        column = t[:m, col]
        pos = np.flatnonzero(column > tol)
        if pos.size == 0:
            raise AssertionError("LP unbounded; impossible for a nonnegative objective")
        ratios = t[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        row = int(ties[np.argmin(basis[ties])])
        _pivot(t, row, col)
        basis[row] = col
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex pivot limit reached")


def simplex(a_ub, b_ub, cost, tol=1e-10, max_pivots=50_000):
    """Solve ``min cost^T x`` s.t. ``a_ub x <= b_ub``, ``x >= 0`` with ``cost >= 0``.

    Returns an :class:`LPResult`; ``status`` is ``"infeasible_lp"`` when
    phase one cannot reach zero infeasibility.
    """
    a_ub = np.asarray(a_ub, dtype=float)
    b_ub = np.asarray(b_ub, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, nv = a_ub.shape
    scale = max(1.0, float(np.max(np.abs(a_ub), initial=0.0)), float(np.max(np.abs(b_ub), initial=0.0)))
    ztol = tol * scale

    # rows with negative rhs are negated, so their slack enters with -1 and needs an artificial
    flip = b_ub < 0
    sign = np.where(flip, -1.0, 1.0)
    art_rows = np.flatnonzero(flip)
    n_art = art_rows.size
    n_struct = nv + m
    n_cols = n_struct + n_art
    t = np.zeros((m + 1, n_cols + 1))
    t[:m, :nv] = a_ub * sign[:, None]
    t[:m, nv:nv + m] = np.diag(sign)
    t[:m, -1] = b_ub * sign
    basis = np.arange(nv, nv + m)
    for k, r in enumerate(art_rows):
        t[r, n_struct + k] = 1.0
        basis[r] = n_struct + k

    pivots = 0
    if n_art:
        # phase one: minimize the sum of artificials
        t[-1, :] = 0.0
        t[-1, n_struct:n_cols] = 1.0
        for r in art_rows:
            t[-1] -= t[r]
        pivots += _run(t, basis, n_cols, ztol, max_pivots)
        if -t[-1, -1] > 1e3 * ztol * max(1, m):
            return LPResult(np.zeros(nv), float("nan"), "infeasible_lp", pivots, basis)
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = np.ones(m + 1, dtype=bool)
        for r in range(m):
            if basis[r] >= n_struct:
                nz = np.flatnonzero(np.abs(t[r, :n_struct]) > ztol)
                if nz.size:
                    _pivot(t, r, int(nz[0]))
                    basis[r] = int(nz[0])
                    pivots += 1
                else:
                    keep[r] = False
        t = np.delete(t[keep], np.s_[n_struct:n_cols], axis=1)
        basis = basis[keep[:-1]]

    t[-1, :] = 0.0
    t[-1, :nv] = cost
    for r, bvar in enumerate(basis):
        if t[-1, bvar] != 0.0:
            t[-1] -= t[-1, bvar] * t[r]
    pivots += _run(t, basis, n_struct, ztol, max_pivots)

    full = np.zeros(n_struct)
    full[basis] = t[:-1, -1]
    # one refinement solve on the original columns for the final basis
    a_eq = np.hstack([a_ub, np.eye(m)])
    rows = np.flatnonzero(keep[:-1]) if n_art else np.arange(m)
    try:
        sol = np.linalg.solve(a_eq[np.ix_(rows, basis)], b_ub[rows])
        if np.all(sol >= -1e3 * ztol) and np.allclose(sol, full[basis], rtol=1e-6, atol=1e3 * ztol):
            full[basis] = sol
    except np.linalg.LinAlgError:
        pass
    x = np.maximum(full[:nv], 0.0)
    return LPResult(x, float(cost @ x), "converged", pivots, basis.copy())


def lp_min_l1(a, c, r, tol=1e-10):
    """Minimize ``||theta||_1`` subject to ``|c + A theta| <= r`` entrywise.

    Solved exactly as an LP in the split ``theta = theta_plus - theta_minus``.
    Returns ``(theta, LPResult)``; on infeasibility ``theta`` is ``None``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    c = np.asarray(c, dtype=float).reshape(-1)
    r = np.asarray(r, dtype=float).reshape(-1)
    m, p = a.shape
    if c.shape != (m,) or r.shape != (m,):
        raise ValueError(f"constraint bundle mismatch: A is {a.shape}, c {c.shape}, r {r.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
        raise ValueError("non-finite entries in the constraint bundle")
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    if np.all(np.abs(c) <= r):
        res = LPResult(np.zeros(2 * p), 0.0, "converged", 0, np.array([], dtype=int))
        return np.zeros(p), res
    a_ub = np.block([[a, -a], [-a, a]])
    b_ub = np.concatenate([r - c, r + c])
    res = simplex(a_ub, b_ub, np.ones(2 * p), tol=tol)
    if res.status != "converged":
        return None, res
    theta = res.x[:p] - res.x[p:]
    return theta, res
