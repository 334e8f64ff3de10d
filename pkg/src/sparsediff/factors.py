"""Cone-restricted factors of a PSD matrix over ``C_T = {h : ||h_{T^c}||_1 <= ||h_T||_1}``.

* compatibility  ``kappa = inf sqrt(S) sqrt(h'Jh) / ||h_T||_1``
* restricted eigenvalue  ``RE = inf sqrt(h'Jh) / ||h||_2``
* weak cone invertibility  ``F_q = inf S^(1/q) sqrt(h'Jh) / (||h_T||_1 ||h||_q)`` on the
  slice ``||h_T||_1 = 1`` for finite ``q``, and ``F_inf = inf sqrt(h'Jh) / ||h||_inf``.

Every infimum is searched on the slice ``||h_T||_1 = 1`` after fixing the
signs of ``h_T``: the slice is then a simplex times an l1 ball, onto which
projection is cheap, and projected gradient descent runs on each piece.
The compatibility subproblems are convex and the ``F_inf`` ones
pseudo-convex, so descent finds their exact minimum; ``RE`` and finite
``F_q`` are nonconvex and rely on restarts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .quasi_lik import j_matrix

__all__ = [
    "FactorReport",
    "cone_ratio",
    "in_cone",
    "compatibility",
    "restricted_eigenvalue",
    "cone_invertibility",
    "factor_report",
    "assumption_check",
    "project_simplex",
    "project_l1_ball",
]

MAX_ENUM_SUPPORT = 12
_ORDER_SLACK = 1e-8


def project_simplex(y, radius=1.0):
    """Row-wise Euclidean projection onto ``{u >= 0, sum(u) = radius}``."""
    y = np.atleast_2d(y)
    k = y.shape[1]
    srt = -np.sort(-y, axis=1)
    css = np.cumsum(srt, axis=1) - radius
    idx = np.arange(1, k + 1)
    cond = srt - css / idx > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(y.shape[0]), rho] / (rho + 1)
    return np.maximum(y - tau[:, None], 0.0)


def project_l1_ball(y, radius=1.0):
    """Row-wise projection onto ``{||v||_1 <= radius}``."""
    y = np.atleast_2d(y)
    out = y.copy()
    outside = np.abs(y).sum(axis=1) > radius
    if np.any(outside):
        out[outside] = np.sign(y[outside]) * project_simplex(np.abs(y[outside]), radius)
    return out


def _check(J, T):
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError("J must be square")
    if not np.allclose(J, J.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(J).max(initial=0.0))):
        raise ValueError("J must be symmetric")
    T = np.unique(np.asarray(T, dtype=int).reshape(-1))
    if T.size == 0:
        raise ValueError("support T must be nonempty")
    if T.min() < 0 or T.max() >= J.shape[0]:
        raise ValueError("support index out of range")
    return 0.5 * (J + J.T), T


def in_cone(h, T, rtol=1e-12):
    h = np.asarray(h, dtype=float)
    mask = np.zeros(h.size, dtype=bool)
    mask[T] = True
    on, off = np.abs(h[mask]).sum(), np.abs(h[~mask]).sum()
    return bool(on > 0 and off <= on * (1 + rtol))


def cone_ratio(J, T, h, kind, q=None):
    """Value of one factor's ratio at a direction ``h`` (normalized to ``||h_T||_1 = 1``)."""
    J = np.asarray(J, dtype=float)
    T = np.asarray(T, dtype=int)
    h = np.asarray(h, dtype=float)
    on = np.abs(h[T]).sum()
    if on == 0:
        raise ValueError("h vanishes on the support")
    h = h / on
    s = T.size
    quad = max(float(h @ J @ h), 0.0)
    root = math.sqrt(quad)
    if kind == "kappa":
        return math.sqrt(s) * root
    if kind == "re":
        return root / float(np.linalg.norm(h))
    if kind == "f":
        if q is None:
            raise ValueError("F needs q")
        if math.isinf(q):
            return root / float(np.max(np.abs(h)))
        return s ** (1.0 / q) * root / float(np.linalg.norm(h, ord=q))
    raise ValueError(f"unknown factor {kind!r}")


# ---- batched projected gradient descent on the slice -----------------------

class _Slice:
    """The slice for one sign pattern, in coordinates ``y = D h`` with ``D`` the pattern's signs."""

    def __init__(self, J, T, signs):
        p = J.shape[0]
        self.p = p
        self.T = T
        self.Tc = np.setdiff1d(np.arange(p), T)
        d = np.ones(p)
        d[T] = signs
        self.d = d
        self.J = J * np.outer(d, d)

    def project(self, Y):
        out = np.empty_like(Y)
        out[:, self.T] = project_simplex(Y[:, self.T])
        if self.Tc.size:
            out[:, self.Tc] = project_l1_ball(Y[:, self.Tc])
        return out

    def to_h(self, y):
        return y * self.d


_KINDS = {"kappa": 0, "re": 1, "fq": 2, "finf": 3}


@njit(cache=True)
def _proj_simplex_1d(u):
    k = u.size
    srt = -np.sort(-u)
    css = 0.0
    tau = 0.0
    for i in range(k):
        css += srt[i]
        cand = (css - 1.0) / (i + 1)
        if srt[i] - cand > 0:
            tau = cand
    return np.maximum(u - tau, 0.0)


@njit(cache=True)
def _project_row(y, T, Tc):
    out = np.empty_like(y)
    out[T] = _proj_simplex_1d(y[T])
    if Tc.size:
        v = y[Tc]
        a = np.abs(v)
        if a.sum() > 1.0:
            out[Tc] = np.sign(v) * _proj_simplex_1d(a)
        else:
            out[Tc] = v
    return out


@njit(cache=True)
def _value_grad(kind, J, y, s, q, j):
    """Squared ratio and its gradient at ``y`` (``inf`` outside the domain)."""
    jy = J @ y
    quad = 0.0
    for i in range(y.size):
        quad += jy[i] * y[i]
    if kind == 0:
        return s * quad, 2.0 * s * jy
    if kind == 1:
        nn = (y * y).sum()
        val = quad / nn
        return val, (2.0 * jy - 2.0 * val * y) / nn
    if kind == 2:
        c = s ** (2.0 / q)
        a = np.abs(y)
        nq = (a ** q).sum() ** (1.0 / q)
        dn = np.sign(y) * (a / nq) ** (q - 1.0)
        val = c * quad / nq ** 2
        return val, c * (2.0 * jy / nq ** 2 - 2.0 * quad / nq ** 3 * dn)
    yj = y[j]
    if yj == 0.0:
        return np.inf, jy
    g = 2.0 * jy / yj ** 2
    g[j] -= 2.0 * quad / yj ** 3
    return quad / yj ** 2, g


@njit(cache=True)
def _backtrack(kind, J, T, Tc, base, bval, bgrad, t, s, q, j):
    for _ in range(60):
        cand = _project_row(base - t * bgrad, T, Tc)
        cv, cg = _value_grad(kind, J, cand, s, q, j)
        diff = cand - base
        bound = bval + (bgrad * diff).sum() + (diff * diff).sum() / (2.0 * t)
        if np.isfinite(cv) and cv <= bound + 1e-15 * abs(bval):
            return cand, cv, cg, t, True
        t *= 0.5
    return base, bval, bgrad, t, False


@njit(cache=True)
def _descend_rows(kind, J, T, Tc, Y, js, s, q, lip, max_iter, tol):
    B = Y.shape[0]
    vals = np.empty(B)
    for r in range(B):
        y = _project_row(Y[r].copy(), T, Tc)
        j = js[r]
        val, g = _value_grad(kind, J, y, s, q, j)
        if not np.isfinite(val):
            Y[r] = y
            vals[r] = val
            continue
        prev = y.copy()
        t = 1.0 / lip
        k = 1.0
        stall = 0
        for _ in range(max_iter):
            beta = (k - 1.0) / (k + 2.0)
            z = _project_row(y + beta * (y - prev), T, Tc)
            zval, zg = _value_grad(kind, J, z, s, q, j)
            if not np.isfinite(zval):
                z, zval, zg = y, val, g
            new, nval, ng, t, ok = _backtrack(kind, J, T, Tc, z, zval, zg, t, s, q, j)
            restarted = False
            if not nval <= val:
                new, nval, ng, t, ok = _backtrack(kind, J, T, Tc, y, val, g, t, s, q, j)
                restarted = True
                k = 0.0
            if ok:
                t *= 1.25
            moved = np.sqrt(((new - y) ** 2).sum())
            if val - nval <= 1e-13 * abs(nval):
                stall += 1
            else:
                stall = 0
            prev = y
            y, val, g = new, nval, ng
            k += 1.0
            if not ok or stall >= 20 or (moved < tol and (restarted or k <= 2.0)):
                break
        Y[r] = y
        vals[r] = val
    return Y, vals


def _descend(sl, kind, Y, q=None, js=None, max_iter=2000, tol=1e-10):
    """Accelerated projected gradient on each row of ``Y``, monotone per row.

    A row extrapolates with Nesterov momentum, takes a backtracked projected
    step, and falls back to a plain step from the current point (resetting
    momentum) whenever the accelerated step does not decrease the objective.
    It stops once a plain step moves less than ``tol``, after 20 consecutive
    iterations with relative gain below 1e-13, or at ``max_iter``.
    """
    J = np.ascontiguousarray(sl.J)
    lip = max(2.0 * float(np.abs(J).sum(axis=1).max()), 1e-12)
    Y = np.ascontiguousarray(Y, dtype=float).copy()
    js = np.zeros(Y.shape[0], dtype=np.int64) if js is None else np.asarray(js, dtype=np.int64)
    return _descend_rows(_KINDS[kind], J, sl.T.astype(np.int64), sl.Tc.astype(np.int64), Y, js,
                         float(sl.T.size), float(q if q is not None else 1.0), lip, int(max_iter), float(tol))


def _patterns(s, rng, limit=MAX_ENUM_SUPPORT, sampled=64):
    """Sign patterns on T with the first sign fixed to +1 (h and -h give equal ratios)."""
    if s <= limit:
        for rest in itertools.product((1.0, -1.0), repeat=s - 1):
            yield np.array((1.0,) + rest)
    else:
        for _ in range(sampled):
            yield np.concatenate([[1.0], rng.choice([1.0, -1.0], size=s - 1)])


def _starts(sl, rng, restarts, extra=()):
    p, T, Tc = sl.p, sl.T, sl.Tc
    s = T.size
    rows = []
    for i in range(s):
        y = np.zeros(p)
        y[T[i]] = 1.0
        rows.append(y)
    y = np.zeros(p)
    y[T] = 1.0 / s
    rows.append(y)
    for y in extra:
        rows.append(y)
    for _ in range(restarts):
        y = np.zeros(p)
        y[T] = rng.dirichlet(np.ones(s))
        if Tc.size:
            w = rng.standard_normal(Tc.size)
            y[Tc] = w / np.abs(w).sum() * rng.uniform() ** (1.0 / Tc.size)
        rows.append(y)
    return np.array(rows)


def _eigen_starts(sl, k=4):
    """Low-eigenvalue directions of the sign-flipped matrix, placed on the slice."""
    w, vecs = np.linalg.eigh(sl.J)
    out = []
    for i in range(min(k, sl.p)):
        for sgn in (1.0, -1.0):
            v = sgn * vecs[:, i]
            on = np.clip(v[sl.T], 0, None).sum()
            if on > 1e-12:
                out.append(v / on)
    return out


def _search(J, T, kind, q=None, restarts=8, seed=0, max_iter=2000):
    """Certificate of the smallest squared ratio over all sign patterns."""
    rng = np.random.default_rng(seed)
    s = T.size
    best_val, best_h = math.inf, None
    on_support = set(T.tolist())
    for signs in _patterns(s, rng):
        sl = _Slice(J, T, signs)
        if kind == "finf":
            # h'Jh / h_j^2 for each coordinate j (and sign of h_j off the support)
            blocks, js = [], []
            # each piece is pseudo-convex on {sgn * h_j > 0}: one start per piece suffices
            base = sl.project(_starts(sl, rng, 0)[-1:])
            for j in range(sl.p):
                for sgn in ((1.0,) if j in on_support else (1.0, -1.0)):
                    Y0 = base.copy()
                    Y0[:, j] = np.where(Y0[:, j] * sgn > 1e-3, Y0[:, j], sgn * 0.5)
                    Y0 = sl.project(Y0)
                    Y0 = Y0[Y0[:, j] * sgn > 0]
                    blocks.append(Y0)
                    js.extend([j] * len(Y0))
            Y, val = _descend(sl, "finf", np.vstack(blocks), js=js, max_iter=max_iter)
        else:
            Y0 = _starts(sl, rng, restarts, _eigen_starts(sl) if kind != "kappa" else ())
            Y, val = _descend(sl, kind, Y0, q=q, max_iter=max_iter)
        i = int(np.nanargmin(val))
        if val[i] < best_val:
            best_val, best_h = float(val[i]), sl.to_h(Y[i])
    return best_h


def _random_search(J, T, kind, q=None, draws=100_000, seed=0, batch=10_000):
    """Best of random slice directions; an upper bound on the infimum."""
    rng = np.random.default_rng(seed)
    p = J.shape[0]
    s = T.size
    Tc = np.setdiff1d(np.arange(p), T)
    best_val, best_h = math.inf, None
    for start in range(0, draws, batch):
        m = min(batch, draws - start)
        H = np.zeros((m, p))
        H[:, T] = rng.dirichlet(np.ones(s), size=m) * rng.choice([-1.0, 1.0], size=(m, s))
        if Tc.size:
            w = rng.standard_normal((m, Tc.size))
            H[:, Tc] = w / np.abs(w).sum(axis=1, keepdims=True) * rng.uniform(size=(m, 1)) ** (1.0 / Tc.size)
        quad = np.maximum(np.sum((H @ J) * H, axis=1), 0.0)
        if kind == "kappa":
            val = s * quad
        elif kind == "re":
            val = quad / np.sum(H * H, axis=1)
        elif math.isinf(q):
            val = quad / np.max(np.abs(H), axis=1) ** 2
        else:
            val = s ** (2.0 / q) * quad / np.linalg.norm(H, ord=q, axis=1) ** 2
        i = int(np.argmin(val))
        if val[i] < best_val:
            best_val, best_h = float(val[i]), H[i].copy()
    return best_h


def _factor(J, T, kind, q=None, method="auto", restarts=8, seed=0):
    J, T = _check(J, T)
    if method == "random":
        h = _random_search(J, T, kind, q, seed=seed)
        used = "random_lower_bound"
    else:
        search_kind = {"kappa": "kappa", "re": "re"}.get(kind)
        if kind == "f":
            search_kind = "finf" if math.isinf(q) else "fq"
        h = _search(J, T, search_kind, q=q, restarts=restarts, seed=seed)
        used = "exact_enumeration" if T.size <= MAX_ENUM_SUPPORT else "projected_descent"
    return cone_ratio(J, T, h, kind, q), h / np.abs(h[T]).sum(), used


def compatibility(J, T0, method="auto", restarts=8, seed=0):
    """Compatibility factor ``kappa(T0; J)``."""
    return _factor(J, T0, "kappa", method=method, restarts=restarts, seed=seed)[0]


def restricted_eigenvalue(J, T0, method="auto", restarts=8, seed=0):
    return _factor(J, T0, "re", method=method, restarts=restarts, seed=seed)[0]


def cone_invertibility(J, T0, q, method="auto", restarts=8, seed=0):
    """Weak cone invertibility factor ``F_q(T0; J)``, ``q`` in ``[1, inf]``."""
    q = float(q)
    if not q >= 1:
        raise ValueError("q must be in [1, inf]")
    return _factor(J, T0, "f", q=q, method=method, restarts=restarts, seed=seed)[0]


@dataclass
class FactorReport:
    support: np.ndarray
    kappa: float
    re: float
    f_q: dict
    method: str
    certificate: dict = field(default_factory=dict)
    ordering: dict = field(default_factory=dict)

    @property
    def ordering_holds(self):
        return all(self.ordering.values())


def factor_report(J, T0, qs=(2.0, math.inf), method="auto", restarts=8, seed=0):
    """All three factors with their minimizing directions.

    ``ordering`` records whether ``kappa <= 2 sqrt(S) RE`` and
    ``kappa <= F_q`` hold for this matrix (to 1e-8).  The first always does;
    the second can fail, e.g. ``J = diag(eps, 1)`` with ``T = {0, 1}``.
    """
    J, T = _check(J, T0)
    s = T.size
    kappa, hk, used = _factor(J, T, "kappa", method=method, restarts=restarts, seed=seed)
    re, hr, _ = _factor(J, T, "re", method=method, restarts=restarts, seed=seed)
    fq, cert = {}, {"kappa": hk, "re": hr}
    for q in qs:
        q = float(q)
        fq[q], cert[f"f{q:g}"], _ = _factor(J, T, "f", q=q, method=method, restarts=restarts, seed=seed)
    ordering = {"kappa<=2sqrtS*re": bool(kappa <= 2 * math.sqrt(s) * re + _ORDER_SLACK)}
    for q, v in fq.items():
        ordering[f"kappa<=f{q:g}"] = bool(kappa <= v + _ORDER_SLACK)
    return FactorReport(T, kappa, re, fq, used, cert, ordering)


def assumption_check(paths, T0, delta=0.05, quantiles=(0.05, 0.25, 0.5, 0.75, 0.95), **kw):
    """Empirical law of ``kappa(T0; J_n)`` over replicate paths."""
    paths = list(paths)
    if len(paths) < 20:
        raise ValueError(f"need at least 20 replicate paths, got {len(paths)}")
    kappas = np.array([compatibility(j_matrix(p), T0, **kw) for p in paths])
    return {
        "kappa": kappas,
        "quantiles": dict(zip(quantiles, np.quantile(kappas, quantiles))),
        "fraction_above": float(np.mean(kappas > delta)),
        "delta": delta,
        "replicates": len(paths),
    }
