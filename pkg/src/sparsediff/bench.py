"""Monte Carlo harness: config parsing, replicate runs, CSV/SVG output and the bound audit."""

from __future__ import annotations

import csv
import io
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .factors import factor_report
from .model_sim import Drift, ModelSpec, generate_covariates, simulate_path
from .quasi_lik import epsilon_n, j_matrix, max_abs, nu_factor, score
from .selector import TuningRule, estimate, gamma_n

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "replicate_seed",
    "theta0_for",
    "p_for",
    "theorem_constants",
    "run_replicate",
    "run_experiment",
    "write_records",
    "read_records",
    "summarize",
    "write_summary",
    "verify_bounds",
    "BoundReport",
    "write_plots",
    "RECORD_COLUMNS",
    "SUMMARY_COLUMNS",
    "RECORDS_TAG",
]

RECORDS_TAG = "# sparse-diff records v1"
CONSTANTS_PREFIX = "# constants"

RECORD_COLUMNS = [
    "n", "p", "replicate", "seed", "gamma_n", "feas_gamma", "feas_6gamma", "epsilon_n",
    "kappa", "re", "f2", "finf", "err_l1", "err_l2", "err_linf",
    "bound_a_slack", "bound_c_slack", "solver_status", "runtime_ms",
]

_NORMS = ("l1", "l2", "linf")
SUMMARY_COLUMNS = (
    ["n", "p", "replicates", "completed", "feas_gamma_freq", "feas_6gamma_freq"]
    + [f"{stat}_{name}" for name in ("err_l1", "err_l2", "err_linf", "epsilon_n", "kappa", "re")
       for stat in ("q25", "median", "q75")]
    + ["feasible_count", "viol_a", "viol_b", "viol_c", "viol_d"]
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    n_grid: tuple
    p: int | None = 20
    p_rule: str = "fixed"           # fixed | exp
    p_c: float = 1.0
    S: int = 2
    theta0_gen: str = "fixed"       # fixed | random
    theta0: tuple = (1.0, -1.0)
    theta0_magnitude: float = 1.0
    tuning: TuningRule = field(default_factory=lambda: TuningRule(1.0, 0.2))
    replicates: int = 50
    drift: Drift = field(default_factory=Drift)
    covariates: str = "ou"
    ou_rate: float = 1.0
    ou_vol: float = 1.0
    cov_bound: float = 1.0
    substeps: int = 50
    x0: float = 0.0
    master_seed: int = 0
    output: str = "results"
    gamma: float | None = None      # fixed radius overriding the tuning rule
    workers: int = 1
    factor_method: str = "auto"
    restarts: int = 8

    def __post_init__(self):
        grid = tuple(int(v) for v in self.n_grid)
        if not grid or any(v < 1 for v in grid):
            raise ConfigError("n_grid must list positive integers")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid must be strictly increasing")
        object.__setattr__(self, "n_grid", grid)
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.p_rule not in ("fixed", "exp"):
            raise ConfigError(f"p_rule must be 'fixed' or 'exp', got {self.p_rule!r}")
        zeta = self.tuning.zeta
        if self.p_rule == "exp":
            if zeta is None:
                raise ConfigError("p_rule = exp needs zeta")
            if not self.p_c > 0:
                raise ConfigError("p_c must be positive")
        elif self.p is None or self.p < 1:
            raise ConfigError("p must be a positive integer")
        if self.S < 0:
            raise ConfigError("S must be >= 0")
        if self.theta0_gen not in ("fixed", "random"):
            raise ConfigError("theta0_gen must be 'fixed' or 'random'")
        if self.theta0_gen == "fixed":
            if any(len(self.theta0) > self.p_at(n) for n in grid):
                raise ConfigError("theta0 lists more entries than p (leading entries, rest zero)")
            if sum(1 for v in self.theta0 if v != 0) != self.S:
                raise ConfigError("theta0 must have exactly S nonzero entries")
        elif not self.theta0_magnitude > 0:
            raise ConfigError("theta0_magnitude must be positive")
        for n in grid:
            if self.S > self.p_at(n):
                raise ConfigError(f"S={self.S} exceeds p={self.p_at(n)} at n={n}")
        if self.covariates not in ("ou", "constant"):
            raise ConfigError("covariates must be 'ou' or 'constant'")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.factor_method not in ("auto", "random"):
            raise ConfigError("factor_method must be 'auto' or 'random'")

    def p_at(self, n):
        return p_for(self, n)

    @property
    def theta0_l1(self):
        if self.theta0_gen == "random":
            return self.S * self.theta0_magnitude
        return float(np.abs(np.asarray(self.theta0, dtype=float)).sum())


def p_for(config, n):
    if config.p_rule == "fixed":
        return int(config.p)
    return int(math.ceil(math.exp(config.p_c * n ** config.tuning.zeta)))


_LIST_KEYS = {"n_grid", "theta0"}
_INT_KEYS = {"p", "S", "replicates", "substeps", "master_seed", "workers", "restarts"}
_FLOAT_KEYS = {"p_c", "theta0_magnitude", "ou_rate", "ou_vol", "cov_bound", "x0", "gamma",
               "K0", "alpha", "zeta"}
_STR_KEYS = {"p_rule", "theta0_gen", "drift", "covariates", "output", "factor_method"}
KNOWN_KEYS = _LIST_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def parse_config(text):
    """Build an :class:`ExperimentConfig` from flat ``key = value`` lines.

    ``#`` starts a comment, lists are comma separated, and ``K0``,
    ``alpha``, ``zeta`` form the tuning rule.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    if "n_grid" not in raw:
        raise ConfigError("missing required key n_grid")

    kw = {}
    try:
        for key, value in raw.items():
            if key in _LIST_KEYS:
                items = [v.strip() for v in value.split(",") if v.strip()]
                kw[key] = tuple(int(v) for v in items) if key == "n_grid" else tuple(float(v) for v in items)
            elif key in _INT_KEYS:
                kw[key] = int(value)
            elif key in _FLOAT_KEYS:
                kw[key] = float(value)
            else:
                kw[key] = value
    except ValueError as exc:
        raise ConfigError(f"bad value: {exc}") from None

    k0 = kw.pop("K0", 1.0)
    alpha = kw.pop("alpha", 0.2)
    zeta = kw.pop("zeta", None)
    if zeta is not None and not zeta < 2 * alpha:
        raise ConfigError(f"need zeta < 2*alpha, got zeta={zeta} >= 2*alpha={2 * alpha}")
    try:
        kw["tuning"] = TuningRule(k0, alpha, zeta)
        if "drift" in kw:
            kw["drift"] = Drift.parse(kw["drift"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if "theta0" in kw and "S" not in kw:
        kw["S"] = sum(1 for v in kw["theta0"] if v != 0)
    if kw.get("theta0_gen") == "random" and "theta0" not in kw:
        kw["theta0"] = ()
    return ExperimentConfig(**kw)


def load_config(path):
    return parse_config(Path(path).read_text())


def replicate_seed(master_seed, n_index, replicate):
    """64-bit seed for one replicate, split off the master seed."""
    ss = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(n_index), int(replicate)))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def theta0_for(config, n_index):
    p = p_for(config, config.n_grid[n_index])
    theta = np.zeros(p)
    if config.theta0_gen == "fixed":
        vals = np.asarray(config.theta0, dtype=float)
        theta[: vals.size] = vals
        return theta
    ss = np.random.SeedSequence(int(config.master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(n_index), 2**31))
    rng = np.random.Generator(np.random.Philox(ss))
    support = np.sort(rng.choice(p, size=config.S, replace=False))
    theta[support] = config.theta0_magnitude * rng.choice([-1.0, 1.0], size=config.S)
    return theta


def theorem_constants(theta0_l1, cov_bound):
    """``nu``, ``K2 = 8|theta0|_1/nu``, ``K3 = 4|theta0|_1^2`` and ``K4 = 4/nu``."""
    radius = 2.0 * cov_bound * theta0_l1
    nu = nu_factor(radius) if radius > 0 else 2.0
    return {"nu": nu, "K2": 8.0 * theta0_l1 / nu, "K3": 4.0 * theta0_l1 ** 2, "K4": 4.0 / nu}


def _bound_a(rec, k):
    return (k["K2"] * rec["gamma_n"] + k["K3"] * rec["epsilon_n"]) / rec["re"] ** 2


def _bound_b(rec, k):
    return (k["K2"] * rec["gamma_n"] + k["K3"] * rec["epsilon_n"]) / rec["finf"] ** 2


def _bound_c(rec, k, S):
    den = rec["kappa"] ** 2 - 4 * S * rec["epsilon_n"]
    if not den > 0:
        return math.nan
    return 4.0 * k["K4"] * S * rec["gamma_n"] / den


def _bound_d(rec, k, S, q=2.0):
    den = rec["kappa"] ** 2 - 2 * S * rec["epsilon_n"]
    if not den > 0 or not rec["f2"] > 0:
        return math.nan
    sq = S ** (1.0 / q)
    return (2 * sq * rec["epsilon_n"] / rec["f2"] * 2 * k["K4"] * S * rec["gamma_n"] / den
            + 2 * k["K4"] * sq * rec["gamma_n"] / rec["f2"])


def run_replicate(config, n_index, replicate):
    """One (n, replicate) cell; errors are captured into ``solver_status``."""
    n = config.n_grid[n_index]
    p = p_for(config, n)
    seed = replicate_seed(config.master_seed, n_index, replicate)
    gamma = config.gamma if config.gamma is not None else gamma_n(config.tuning, n)
    rec = {c: math.nan for c in RECORD_COLUMNS}
    rec.update(n=n, p=p, replicate=replicate, seed=seed, gamma_n=gamma, feas_gamma=0, feas_6gamma=0)
    t0 = time.perf_counter()
    try:
        theta0 = theta0_for(config, n_index)
        spec = ModelSpec(p, n, theta0, drift=config.drift, cov_bound=config.cov_bound,
                         x0=config.x0, substeps=config.substeps, covariates=config.covariates,
                         ou_rate=config.ou_rate, ou_vol=config.ou_vol)
        path = simulate_path(spec, generate_covariates(spec, seed), seed)
        sup0 = max_abs(score(path, theta0))
        rec["feas_gamma"] = int(sup0 <= gamma)
        rec["feas_6gamma"] = int(sup0 <= 6 * gamma)
        rec["epsilon_n"] = epsilon_n(path, theta0)
        if spec.S > 0:
            rep = factor_report(j_matrix(path), spec.support, method=config.factor_method,
                                restarts=config.restarts, seed=seed)
            rec.update(kappa=rep.kappa, re=rep.re, f2=rep.f_q[2.0], finf=rep.f_q[math.inf])
        res = estimate(path, gamma)
        h = res.theta_hat - theta0
        rec.update(err_l1=float(np.abs(h).sum()), err_l2=float(np.linalg.norm(h)),
                   err_linf=max_abs(h), solver_status=res.solver_status)
        if spec.S > 0:
            k = theorem_constants(config.theta0_l1, config.cov_bound)
            rec["bound_a_slack"] = _bound_a(rec, k) - rec["err_l2"] ** 2
            rec["bound_c_slack"] = _bound_c(rec, k, spec.S) - rec["err_l1"]
    except Exception as exc:  # recorded per replicate, the run goes on
        rec["solver_status"] = f"error:{type(exc).__name__}"
        rec["error_detail"] = traceback.format_exc(limit=3)
    rec["runtime_ms"] = (time.perf_counter() - t0) * 1e3
    return rec


def _run_cell(args):
    return run_replicate(*args)


def run_experiment(config, output=None, progress=None):
    """Run every (n, replicate) cell and write records, summary and plots.

    Returns the list of record dicts sorted by ``(n, replicate)``.
    """
    out = Path(output if output is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(config, i, r) for i in range(len(config.n_grid)) for r in range(config.replicates)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_cell, cells, chunksize=4))
    else:
        records = []
        for cell in cells:
            records.append(run_replicate(*cell))
            if progress:
                progress(records[-1])
    records.sort(key=lambda r: (r["n"], r["replicate"]))
    constants = {"theta0_l1": config.theta0_l1, "cov_bound": config.cov_bound, "S": config.S}
    constants.update(theorem_constants(config.theta0_l1, config.cov_bound))
    write_records(records, out / "records.csv", constants)
    rows = summarize(records, constants)
    write_summary(rows, out / "summary.csv")
    write_plots(rows, out)
    failures = [r for r in records if str(r["solver_status"]).startswith("error")]
    if failures:
        with open(out / "errors.log", "w") as fh:
            for r in failures:
                fh.write(f"n={r['n']} replicate={r['replicate']}\n{r.get('error_detail', '')}\n")
    return records


# ---- CSV ---------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_records(records, dest, constants):
    with open(dest, "w", newline="") as fh:
        fh.write(RECORDS_TAG + "\n")
        fh.write(CONSTANTS_PREFIX + " " + " ".join(f"{k}={_fmt(v)}" for k, v in constants.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for rec in records:
            w.writerow([_fmt(rec[c]) for c in RECORD_COLUMNS])


def read_records(src):
    """Records and the constants line from a records CSV."""
    text = Path(src).read_text()
    constants = {}
    body = []
    for line in text.splitlines():
        if line.startswith(CONSTANTS_PREFIX):
            for item in line[len(CONSTANTS_PREFIX):].split():
                key, value = item.split("=", 1)
                constants[key] = float(value)
        elif not line.startswith("#") and line.strip():
            body.append(line)
    if not body:
        return [], constants
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    missing = [c for c in RECORD_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise ValueError(f"records file lacks columns: {', '.join(missing)}")
    records = []
    for row in reader:
        rec = {}
        for c in RECORD_COLUMNS:
            if c == "solver_status":
                rec[c] = row[c]
            elif c in ("n", "p", "replicate", "seed", "feas_gamma", "feas_6gamma"):
                rec[c] = int(row[c])
            else:
                rec[c] = float(row[c])
        records.append(rec)
    return records, constants


# ---- bound audit ---------------------------------------------------------------

@dataclass
class BoundReport:
    """Violation fractions per bound among replicates feasible at level gamma_n.

    Keys are ``a`` (l2 via RE), ``b`` (l_inf via F_inf), ``c`` (l1 via
    kappa, K4 = 4/nu) and ``d`` (l2 via xi_{n,2}).  ``vacuous`` means no
    feasible replicate was available.
    """

    feasible: int
    total: int
    applicable: dict
    violations: dict
    fraction: dict
    median_slack: dict
    vacuous: bool
    constants: dict = field(default_factory=dict)

    def lines(self):
        head = f"feasible replicates: {self.feasible}/{self.total}"
        if self.vacuous:
            return [head, "report vacuous: no replicate with theta0 feasible at gamma_n"]
        out = [head, "K4 = 4/nu (interpretation; the source leaves it unnamed)"]
        for key in "abcd":
            out.append(f"bound ({key}): applicable {self.applicable[key]}, violations {self.violations[key]}, "
                       f"fraction {self.fraction[key]:.4g}, median slack {self.median_slack[key]:.4g}")
        return out


def verify_bounds(records, constants, tol=1e-9):
    """Audit the four error bounds on the replicates where theta0 was gamma_n-feasible.

    A bound whose denominator is not positive (or whose factor is missing)
    is counted as not applicable for that record.
    """
    records = [r for r in records if not str(r["solver_status"]).startswith("error")]
    if "theta0_l1" not in constants or "cov_bound" not in constants:
        raise ValueError("records file lacks the constants line")
    S = int(constants.get("S", 0))
    k = theorem_constants(constants["theta0_l1"], constants["cov_bound"])
    feas = [r for r in records if r["feas_gamma"] == 1 and S > 0]
    slacks = {key: [] for key in "abcd"}
    for r in feas:
        errs = {"a": r["err_l2"] ** 2, "b": r["err_linf"] ** 2, "c": r["err_l1"], "d": r["err_l2"]}
        bounds = {
            "a": _bound_a(r, k) if r["re"] > 0 else math.nan,
            "b": _bound_b(r, k) if r["finf"] > 0 else math.nan,
            "c": _bound_c(r, k, S),
            "d": _bound_d(r, k, S),
        }
        for key in "abcd":
            if math.isfinite(bounds[key]):
                slacks[key].append(bounds[key] - errs[key])
    applicable = {key: len(v) for key, v in slacks.items()}
    violations = {key: int(sum(s < -tol * max(1.0, abs(s)) for s in v)) for key, v in slacks.items()}
    fraction = {key: violations[key] / applicable[key] if applicable[key] else math.nan for key in slacks}
    median = {key: float(np.median(v)) if v else math.nan for key, v in slacks.items()}
    return BoundReport(len(feas), len(records), applicable, violations, fraction, median,
                       not feas, k)


# ---- summary -------------------------------------------------------------------

def _quartiles(values):
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan, math.nan
    q = np.quantile(v, [0.25, 0.5, 0.75])
    return float(q[0]), float(q[1]), float(q[2])


def summarize(records, constants):
    rows = []
    for n in sorted({r["n"] for r in records}):
        group = [r for r in records if r["n"] == n]
        ok = [r for r in group if not str(r["solver_status"]).startswith("error")]
        row = {"n": n, "p": group[0]["p"], "replicates": len(group), "completed": len(ok),
               "feas_gamma_freq": float(np.mean([r["feas_gamma"] for r in group])),
               "feas_6gamma_freq": float(np.mean([r["feas_6gamma"] for r in group]))}
        for name in ("err_l1", "err_l2", "err_linf", "epsilon_n", "kappa", "re"):
            row[f"q25_{name}"], row[f"median_{name}"], row[f"q75_{name}"] = _quartiles([r[name] for r in ok])
        rep = verify_bounds(group, constants)
        row["feasible_count"] = rep.feasible
        for key in "abcd":
            row[f"viol_{key}"] = rep.fraction[key]
        rows.append(row)
    return rows


def write_summary(rows, dest):
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])


def read_summary(src):
    with open(src, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return []
    return [{k: (int(v) if k in ("n", "p", "replicates", "completed", "feasible_count") else float(v))
             for k, v in row.items()} for row in rows]


# ---- SVG -------------------------------------------------------------------------

def _log_ticks(lo, hi):
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    return [10.0 ** e for e in range(a, b + 1)]


def render_svg(ns, series, title, ylabel, width=480, height=360):
    """Log-log line chart; ``series`` maps a label to (median, q25, q75) lists."""
    pad_l, pad_r, pad_t, pad_b = 64, 16, 32, 48
    pts = [v for med, lo, hi in series.values() for v in (*med, *lo, *hi) if math.isfinite(v) and v > 0]
    if not pts:
        pts = [1.0]
    ylo, yhi = min(pts), max(pts)
    if ylo == yhi:
        ylo, yhi = ylo / 2, yhi * 2
    xlo, xhi = min(ns), max(ns)
    if xlo == xhi:
        xlo, xhi = xlo / 2, xhi * 2
    lx0, lx1 = math.log10(xlo) - 0.05, math.log10(xhi) + 0.05
    ly0, ly1 = math.log10(ylo) - 0.1, math.log10(yhi) + 0.1

    def sx(x):
        return pad_l + (math.log10(x) - lx0) / (lx1 - lx0) * (width - pad_l - pad_r)

    def sy(y):
        return height - pad_b - (math.log10(y) - ly0) / (ly1 - ly0) * (height - pad_t - pad_b)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
           f'<line x1="{pad_l}" y1="{height - pad_b}" x2="{width - pad_r}" y2="{height - pad_b}" stroke="black"/>',
           f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{height - pad_b}" stroke="black"/>']
    for n in ns:
        x = sx(n)
        out.append(f'<line x1="{x:.1f}" y1="{height - pad_b}" x2="{x:.1f}" y2="{height - pad_b + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{height - pad_b + 16}" text-anchor="middle">{n}</text>')
    for t in _log_ticks(10 ** ly0, 10 ** ly1):
        if ly0 <= math.log10(t) <= ly1:
            y = sy(t)
            out.append(f'<line x1="{pad_l - 4}" y1="{y:.1f}" x2="{width - pad_r}" y2="{y:.1f}" stroke="#ddd"/>')
            out.append(f'<text x="{pad_l - 6}" y="{y + 4:.1f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle">n</text>')
    out.append(f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {height / 2:.1f})">{ylabel}</text>')
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    for (label, (med, lo, hi)), color in zip(series.items(), colors):
        for n, a, b in zip(ns, lo, hi):
            if math.isfinite(a) and math.isfinite(b) and a > 0 and b > 0:
                out.append(f'<line x1="{sx(n):.1f}" y1="{sy(a):.1f}" x2="{sx(n):.1f}" y2="{sy(b):.1f}" '
                           f'stroke="{color}" stroke-opacity="0.5" stroke-width="3"/>')
        good = [(n, v) for n, v in zip(ns, med) if math.isfinite(v) and v > 0]
        if good:
            coords = " ".join(f"{sx(n):.1f},{sy(v):.1f}" for n, v in good)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            for n, v in good:
                out.append(f'<circle cx="{sx(n):.1f}" cy="{sy(v):.1f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{width - pad_r - 4}" y="{pad_t + 12}" text-anchor="end" fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_plots(rows, out_dir):
    """One log-log SVG per norm, median with interquartile bars."""
    out_dir = Path(out_dir)
    ns = [r["n"] for r in rows]
    written = []
    for q in _NORMS:
        col = f"err_{q}"
        series = {f"median |theta_hat - theta0|_{q[1:]}": ([r[f"median_{col}"] for r in rows],
                                                          [r[f"q25_{col}"] for r in rows],
                                                          [r[f"q75_{col}"] for r in rows])}
        dest = out_dir / f"err_{q}_vs_n.svg"
        dest.write_text(render_svg(ns, series, f"estimation error ({q})", f"error {q}"))
        written.append(dest)
    return written
