"""Dantzig-type selector for the diffusion coefficient parameter.

    theta_hat = argmin ||theta||_1  subject to  ||psi_n(0; theta)||_inf <= gamma

The constraint set is not convex, so it is handled by sequential
linearization: each round replaces ``psi_n`` by its first-order expansion
around the current iterate and solves the resulting l1 LP exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lp import lp_min_l1
from .quasi_lik import hessian, max_abs, score

__all__ = [
    "TuningRule",
    "EstimateResult",
    "gamma_n",
    "estimate",
    "closed_form_1d",
    "log_regression_init",
    "LOG_CHI2_MEAN",
    "FEAS_SLACK",
]

# E[log chi^2_1] = digamma(1/2) + log 2
LOG_CHI2_MEAN = -1.2703628454614782
FEAS_SLACK = 1e-6


@dataclass(frozen=True)
class TuningRule:
    """``gamma_n = K0 * (1/n)**(1/2 - alpha)``; ``zeta`` is the growth exponent allowed for log(1+p)."""

    K0: float
    alpha: float
    zeta: float | None = None

    def __post_init__(self):
        if not (self.K0 > 0 and math.isfinite(self.K0)):
            raise ValueError("K0 must be positive")
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie strictly inside (0, 1/2)")
        if self.zeta is not None and not 0 < self.zeta < 2 * self.alpha:
            raise ValueError(f"need 0 < zeta < 2*alpha, got zeta={self.zeta}, alpha={self.alpha}")


def gamma_n(rule, n):
    if int(n) < 1:
        raise ValueError("n must be >= 1")
    return rule.K0 * (1.0 / n) ** (0.5 - rule.alpha)


@dataclass
class EstimateResult:
    theta_hat: np.ndarray
    gamma: float
    feasible: bool
    iterations: int
    objective: float
    solver_status: str          # converged | max_iters | infeasible_lp
    trace: list = field(default_factory=list)
    constraint_sup: float = float("nan")


def _constraint_sup(path, theta):
    return max_abs(score(path, theta))


def estimate(path, gamma, init=None, max_rounds=50, step_tol=1e-8):
    """Sequential-linearization Dantzig selector with ``b = 0``.

    Round ``m`` minimizes ``||theta||_1`` under
    ``|psi(theta_m) - V(theta_m)(theta - theta_m)| <= gamma``.  The
    returned ``feasible`` flag is always re-checked against the nonlinear
    score, never taken from the LP.
    """
    gamma = float(gamma)
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ValueError("gamma must be a finite positive number")
    if not (np.all(np.isfinite(path.x)) and np.all(np.isfinite(path.z))):
        raise ValueError("path contains non-finite values")
    p = path.p
    limit = gamma * (1.0 + FEAS_SLACK)

    zero = np.zeros(p)
    sup0 = _constraint_sup(path, zero)
    if sup0 <= gamma:
        return EstimateResult(zero, gamma, True, 1, 0.0, "converged", [(0.0, 0.0)], sup0)

    theta = log_regression_init(path) if init is None else np.asarray(init, dtype=float).copy()
    trace = []
    best = None
    status = "max_iters"
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        psi = score(path, theta)
        v = hessian(path, theta)
        new, lp = lp_min_l1(-v, psi + v @ theta, np.full(p, gamma))
        if new is None:
            status = "infeasible_lp"
            break
        sup = _constraint_sup(path, new)
        obj = float(np.abs(new).sum())
        trace.append((obj, max(sup - gamma, 0.0)))
        if sup <= limit and (best is None or obj < best[1]):
            best = (new, obj, sup)
        step = max_abs(new - theta)
        theta = new
        if step < step_tol:
            status = "converged"
            break

    sup = _constraint_sup(path, theta)
    if status != "converged" and best is not None:
        theta, sup = best[0], best[2]
    return EstimateResult(theta, gamma, bool(sup <= limit), rounds,
                          float(np.abs(theta).sum()), status, trace, sup)


def _constant_level(path):
    if path.p != 1:
        raise ValueError("closed form needs a single covariate")
    z = path.z[0]
    if not np.all(z == z[0]):
        raise ValueError("covariate is not constant")
    if z[0] == 0:
        raise ValueError("covariate must be nonzero")
    return float(z[0])


def feasible_interval_1d(path, gamma):
    """Exact feasible set ``[lo, hi]`` (possibly with an infinite end) for a constant covariate."""
    gamma = float(gamma)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    c = _constant_level(path)
    q = float(np.sum(np.diff(path.x) ** 2)) / (path.n * path.delta)
    if not q > 0:
        raise ValueError("no solution: realized quadratic variation is zero")
    # psi(theta) = c * (u - 1) with u = Q exp(-2 c theta) > 0
    u_hi = 1.0 + gamma / abs(c)
    u_lo = 1.0 - gamma / abs(c)
    ends = [math.log(q / u_hi) / (2 * c)]
    ends.append(math.log(q / u_lo) / (2 * c) if u_lo > 0 else math.copysign(math.inf, c))
    return min(ends), max(ends)


def closed_form_1d(path, gamma):
    """Selector value for ``p = 1`` with a constant nonzero covariate (analytic oracle)."""
    lo, hi = feasible_interval_1d(path, gamma)
    if lo <= 0.0 <= hi:
        return 0.0
    return lo if lo > 0 else hi


def log_regression_init(path):
    """Starting point from the log-linear form of the squared increments.

    ``log(dX^2 / Delta) - E[log chi^2_1]`` is approximately ``2 theta^T Z``
    plus centred noise; a linear Dantzig selector on that regression gives
    the initial iterate.
    """
    zl = path.z[:, :-1]
    n, p = path.n, path.p
    if not np.any(zl):
        warnings.warn("degenerate design: all covariates are zero", RuntimeWarning, stacklevel=2)
        return np.zeros(p)
    dx2 = np.maximum(np.diff(path.x) ** 2, 1e-300)
    y = np.log(dx2 / path.delta) - LOG_CHI2_MEAN
    design = 2.0 * zl.T
    gram = design.T @ design / n
    corr = design.T @ y / n
    sd = float(np.std(y, ddof=1)) if n > 1 else 1.0
    gamma_init = 2.0 * math.sqrt(math.log1p(p) / n) * sd
    theta, _ = lp_min_l1(-gram, corr, np.full(p, max(gamma_init, 1e-12)))
    if theta is None:
        return np.zeros(p)
    return theta
