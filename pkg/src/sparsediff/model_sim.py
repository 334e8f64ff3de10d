"""Covariate generation and Euler-Maruyama simulation of the diffusion

    dX_t = b(X_t) dt + exp(theta^T Z_t) dW_t,   t in [0, 1],

observed at t_k = k/n, plus a small binary container for observed paths.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "Drift",
    "ModelSpec",
    "CovariatePath",
    "FineRecord",
    "ObservedPath",
    "PathFormatError",
    "make_rng",
    "generate_covariates",
    "constant_covariates",
    "simulate_fine",
    "simulate_path",
    "save_path",
    "load_path",
]

# Independent seed domains: the same user seed never feeds two streams.
COVARIATE_DOMAIN = 0
BROWNIAN_DOMAIN = 1
REPLICATE_DOMAIN = 2

MAGIC = b"SDIFFPATH1"
HEADER_END = b"---\n"


def make_rng(seed, *domain):
    """Philox generator keyed by ``seed`` and a spawn key ``domain``."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(d) for d in domain))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Drift:
    """Nuisance drift ``b``: ``zero``, ``linear`` (b(x) = -lam*x) or ``tanh`` (b(x) = a*tanh(x))."""

    kind: str = "zero"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "tanh"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if not math.isfinite(self.param):
            raise ValueError("drift parameter must be finite")
        if self.kind == "linear" and self.param < 0:
            raise ValueError("linear drift needs lambda >= 0")
        if self.kind == "zero" and self.param != 0:
            raise ValueError("zero drift takes no parameter")

    @classmethod
    def parse(cls, text):
        """Parse ``"zero"``, ``"linear:0.5"`` or ``"tanh:1.2"``."""
        text = text.strip()
        if ":" in text:
            kind, val = text.split(":", 1)
            return cls(kind.strip(), float(val))
        return cls(text, 0.0)

    def __str__(self):
        return "zero" if self.kind == "zero" else f"{self.kind}:{self.param!r}"

    @property
    def is_zero(self):
        return self.kind == "zero" or self.param == 0.0

    @property
    def lipschitz(self):
        return abs(self.param)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "linear":
            return -self.param * x
        return self.param * np.tanh(x)


ZERO_DRIFT = Drift()


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """True model and simulation settings.

    ``covariates`` is ``"ou"`` (C*tanh of a stationary OU path with mean
    reversion ``ou_rate`` and volatility ``ou_vol``, both 1 by default) or
    ``"constant"`` (uniform draws on [-C, C] held fixed in time).
    """

    p: int
    n: int
    theta0: np.ndarray
    drift: Drift = ZERO_DRIFT
    cov_bound: float = 1.0
    x0: float = 0.0
    substeps: int = 50
    covariates: str = "ou"
    ou_rate: float = 1.0
    ou_vol: float = 1.0

    def __post_init__(self):
        theta0 = np.array(self.theta0, dtype=float).reshape(-1)
        object.__setattr__(self, "theta0", theta0)
        if int(self.p) <= 0:
            raise ValueError("p must be positive")
        if int(self.n) <= 0:
            raise ValueError("n must be positive")
        if int(self.substeps) <= 0:
            raise ValueError("substeps must be positive")
        if not self.cov_bound > 0 or not math.isfinite(self.cov_bound):
            raise ValueError("cov_bound must be a finite positive number")
        if theta0.shape != (self.p,):
            raise ValueError(f"theta0 has length {theta0.size}, expected p={self.p}")
        if not np.all(np.isfinite(theta0)):
            raise ValueError("theta0 must be finite")
        for name in ("ou_rate", "ou_vol"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite positive number")
        if self.covariates not in ("ou", "constant"):
            raise ValueError(f"unknown covariate mode {self.covariates!r}")
        if isinstance(self.drift, str):
            object.__setattr__(self, "drift", Drift.parse(self.drift))

    @property
    def support(self):
        return np.flatnonzero(self.theta0)

    @property
    def S(self):
        return int(np.count_nonzero(self.theta0))

    @property
    def delta(self):
        return 1.0 / self.n

    @property
    def n_fine(self):
        return self.n * self.substeps

    def digest(self):
        h = hashlib.sha256()
        h.update(repr((self.p, self.n, str(self.drift), float(self.cov_bound), float(self.x0),
                       self.substeps, self.covariates, float(self.ou_rate),
                       float(self.ou_vol))).encode())
        h.update(self.theta0.astype("<f8").tobytes())
        return h.hexdigest()[:16]

    def replace(self, **changes):
        fields = dict(p=self.p, n=self.n, theta0=self.theta0, drift=self.drift,
                      cov_bound=self.cov_bound, x0=self.x0, substeps=self.substeps,
                      covariates=self.covariates, ou_rate=self.ou_rate, ou_vol=self.ou_vol)
        fields.update(changes)
        return ModelSpec(**fields)


@dataclass(eq=False)
class CovariatePath:
    grid: np.ndarray
    values: np.ndarray
    substeps: int
    mode: str = "ou"
    seed: int | None = None

    @property
    def p(self):
        return self.values.shape[0]

    @property
    def n(self):
        return (self.values.shape[1] - 1) // self.substeps

    def observed(self):
        return self.values[:, :: self.substeps]


def _fine_grid(n, m):
    return np.arange(n * m + 1, dtype=float) / (n * m)


def generate_covariates(spec, seed):
    """Covariate path on the fine grid, deterministic in ``(spec, seed)``.

    In ``"ou"`` mode each coordinate is ``C * tanh(Y)`` with ``Y`` an OU
    process ``dY = -r Y dt + v dW`` (``r = ou_rate``, ``v = ou_vol``) started
    from its stationary law N(0, v^2 / 2r) and advanced by exact Gaussian
    transitions.
    """
    p, m = spec.p, spec.substeps
    n_fine = spec.n_fine
    rng = make_rng(seed, COVARIATE_DOMAIN)
    grid = _fine_grid(spec.n, m)
    c = spec.cov_bound
    if spec.covariates == "constant":
        draws = rng.uniform(-c, c, size=p)
        values = np.repeat(draws[:, None], n_fine + 1, axis=1)
        return CovariatePath(grid, values, m, "constant", int(seed))

    dt = 1.0 / n_fine
    rate, vol = spec.ou_rate, spec.ou_vol
    decay = math.exp(-rate * dt)
    step_sd = vol * math.sqrt(-math.expm1(-2.0 * rate * dt) / (2.0 * rate))
    start = rng.normal(0.0, vol / math.sqrt(2.0 * rate), size=p)
    shocks = rng.standard_normal((p, n_fine)) * step_sd
    # AR(1) recursion y[j+1] = decay*y[j] + shock[j], run along time for every row
    tail = lfilter([1.0], [1.0, -decay], shocks, axis=1, zi=(decay * start)[:, None])[0]
    ou = np.concatenate([start[:, None], tail], axis=1)
    return CovariatePath(grid, c * np.tanh(ou), m, "ou", int(seed))


def constant_covariates(spec, values):
    """Constant-mode covariates with explicitly chosen levels (one per coordinate)."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape != (spec.p,):
        raise ValueError("need one constant per covariate")
    if np.any(np.abs(values) > spec.cov_bound):
        raise ValueError("constant covariate exceeds cov_bound")
    grid = _fine_grid(spec.n, spec.substeps)
    z = np.repeat(values[:, None], spec.n_fine + 1, axis=1)
    return CovariatePath(grid, z, spec.substeps, "constant", None)


@dataclass(eq=False)
class ObservedPath:
    """The n+1 observations of X with covariates at the same times."""

    n: int
    x: np.ndarray
    z: np.ndarray
    seed: dict = field(default_factory=dict)
    substeps: int = 1
    spec_digest: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        self.z = np.atleast_2d(np.asarray(self.z, dtype=float))
        if self.x.shape != (self.n + 1,):
            raise ValueError(f"x has {self.x.size} points, expected n+1={self.n + 1}")
        if self.z.shape[1] != self.n + 1:
            raise ValueError("z must have n+1 columns")

    @property
    def p(self):
        return self.z.shape[0]

    @property
    def delta(self):
        return 1.0 / self.n

    @property
    def times(self):
        return np.arange(self.n + 1) / self.n

    def __eq__(self, other):
        if not isinstance(other, ObservedPath):
            return NotImplemented
        return (self.n == other.n and self.substeps == other.substeps
                and self.spec_digest == other.spec_digest and self.seed == other.seed
                and np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z))


@dataclass(eq=False)
class FineRecord:
    """Everything the simulator saw: fine-grid X, covariates and Brownian increments."""

    n: int
    substeps: int
    x: np.ndarray
    z: np.ndarray
    dw: np.ndarray
    theta0: np.ndarray
    drift: Drift
    seed: dict = field(default_factory=dict)
    spec_digest: str = ""

    @property
    def p(self):
        return self.z.shape[0]

    def observed(self):
        m = self.substeps
        return ObservedPath(self.n, self.x[::m].copy(), self.z[:, ::m].copy(),
                            dict(self.seed), m, self.spec_digest)


def simulate_fine(spec, cov, seed):
    """Euler-Maruyama on the fine grid, keeping the full record."""
    if cov.values.shape != (spec.p, spec.n_fine + 1) or cov.substeps != spec.substeps:
        raise ValueError(
            f"covariate path shape {cov.values.shape} / substeps {cov.substeps} "
            f"does not match spec (p={spec.p}, n={spec.n}, M={spec.substeps})")
    n_fine = spec.n_fine
    dt = 1.0 / n_fine
    rng = make_rng(seed, BROWNIAN_DOMAIN)
    dw = rng.standard_normal(n_fine) * math.sqrt(dt)
    sigma = np.exp(spec.theta0 @ cov.values[:, :-1])
    noise = sigma * dw
    drift = spec.drift
    x0 = float(spec.x0)
    if drift.is_zero:
        x = np.empty(n_fine + 1)
        x[0] = x0
        np.cumsum(noise, out=x[1:])
        x[1:] += x0
    elif drift.kind == "linear":
        a = 1.0 - drift.param * dt
        tail = lfilter([1.0], [1.0, -a], noise, zi=[a * x0])[0]
        x = np.concatenate([[x0], tail])
    else:
        x = np.empty(n_fine + 1)
        x[0] = x0
        amp = drift.param
        cur = x0
        for j in range(n_fine):
            cur = cur + amp * math.tanh(cur) * dt + noise[j]
            x[j + 1] = cur
    seeds = {"covariates": cov.seed if cov.seed is not None else -1, "brownian": int(seed)}
    return FineRecord(spec.n, spec.substeps, x, cov.values, dw, spec.theta0.copy(), drift,
                      seeds, spec.digest())


def simulate_path(spec, cov, seed):
    """Observed path at t_k = k/n; the Brownian stream is keyed separately from the covariates."""
    return simulate_fine(spec, cov, seed).observed()


class PathFormatError(ValueError):
    """Malformed, truncated or corrupted path file."""


def _checksum(payload):
    return hashlib.blake2b(payload, digest_size=8).digest()


def save_path(path, dest):
    """Write ``path`` in the SDIFFPATH1 container.

    Layout: ``SDIFFPATH1\\n``, ``key=value`` header lines, a ``---`` line,
    the payload (x then z row-major, little-endian float64) and an 8-byte
    BLAKE2b checksum of the payload.
    """
    payload = (np.ascontiguousarray(path.x, dtype="<f8").tobytes()
               + np.ascontiguousarray(path.z, dtype="<f8").tobytes())
    header = {
        "n": path.n,
        "p": path.p,
        "M": path.substeps,
        "seed_covariates": path.seed.get("covariates", -1),
        "seed_brownian": path.seed.get("brownian", -1),
        "spec_digest": path.spec_digest or "-",
        "payload_bytes": len(payload),
    }
    text = "".join(f"{k}={v}\n" for k, v in header.items()).encode("ascii")
    blob = MAGIC + b"\n" + text + HEADER_END + payload + _checksum(payload)
    Path(dest).write_bytes(blob)


def load_path(src):
    blob = Path(src).read_bytes()
    if not blob.startswith(MAGIC + b"\n"):
        raise PathFormatError("not a SDIFFPATH1 file (bad magic)")
    end = blob.find(HEADER_END, len(MAGIC) + 1)
    if end < 0:
        raise PathFormatError("header terminator missing")
    header = {}
    for line in blob[len(MAGIC) + 1:end].decode("ascii", errors="replace").splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise PathFormatError(f"malformed header line {line!r}")
        header[key.strip()] = value.strip()
    try:
        n, p, m = int(header["n"]), int(header["p"]), int(header["M"])
        nbytes = int(header["payload_bytes"])
        seeds = {"covariates": int(header["seed_covariates"]),
                 "brownian": int(header["seed_brownian"])}
    except (KeyError, ValueError) as exc:
        raise PathFormatError(f"malformed header: {exc}") from None
    if nbytes != 8 * (n + 1) * (p + 1):
        raise PathFormatError("header payload size inconsistent with n and p")
    start = end + len(HEADER_END)
    body = blob[start:]
    if len(body) != nbytes + 8:
        raise PathFormatError(f"file truncated or padded: {len(body)} bytes after header, "
                              f"expected {nbytes + 8}")
    payload, check = body[:nbytes], body[nbytes:]
    if _checksum(payload) != check:
        raise PathFormatError("checksum mismatch")
    data = np.frombuffer(payload, dtype="<f8").astype(float)
    x = data[: n + 1]
    z = data[n + 1:].reshape(p, n + 1)
    digest = header.get("spec_digest", "-")
    return ObservedPath(n, x, z, seeds, m, "" if digest == "-" else digest)

