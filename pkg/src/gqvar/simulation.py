"""Exact Gaussian sampling of the increment vector and Monte Carlo harnesses."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.integrate import quad
from scipy.special import ndtr

from . import _kernels
from .cumulants import sigma_n_sq
from .errors import DomainError, NotPSDError, SizeLimitError
from .models import (
    DEFAULT_MAX_N,
    CovarianceModel,
    IncrementCovariance,
    ModelKind,
    increment_covariance,
    rho_row,
    theta_block,
)

JITTERS = (1e-12, 1e-10, 1e-9)
RECONSTRUCTION_TOL = 1e-8
ASCLT_MAX_N = 2 ** 14
SAMPLE_CHUNK = 4096
CSV_FIELDS = ("model", "params", "n", "reps", "seed", "ks", "emp_mean", "emp_var")
SAMPLES_MAGIC = b"GQVS"


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray
    jitter: float
    trace: float
    n: int
    reconstruction_error: float


def _min_pivot_ok(lower: np.ndarray, scale: float) -> bool:
    # a pivot at roundoff level means the jittered matrix is still numerically singular
    piv = np.diagonal(lower)
    return bool(np.min(piv) ** 2 > 64.0 * np.finfo(float).eps * scale)


def cholesky_factor(theta, *, overwrite: bool = False) -> CholeskyFactor:
    """Lower Cholesky factor of theta, escalating diagonal jitter through JITTERS.

    With ``overwrite=True`` theta is factored in place and only the diagonal
    of L L^T is checked against the saved diagonal of theta.
    """
    if isinstance(theta, IncrementCovariance):
        theta = theta.theta
    theta = np.asarray(theta, dtype=np.float64)
    n = theta.shape[0]
    if theta.shape != (n, n):
        raise DomainError("theta must be square")
    diag = np.diagonal(theta).copy()
    trace = math.fsum(diag)
    scale = max(float(np.max(np.abs(diag))), 1e-300)

    if np.count_nonzero(theta) == np.count_nonzero(diag):
        if np.any(diag < 0):
            raise NotPSDError("diagonal covariance with a negative entry")
        lower = np.diag(np.sqrt(diag))
        return CholeskyFactor(lower, 0.0, trace, n, 0.0)

    if overwrite:
        try:
            lower = linalg.cholesky(theta.T, lower=True, overwrite_a=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NotPSDError("in-place factorization failed; retry without overwrite for jitter") from exc
        _zero_upper(lower)
        if not _min_pivot_ok(lower, scale):
            raise NotPSDError("theta is numerically singular; factor a copy to allow jitter")
        err = float(np.max(np.abs(np.einsum("ij,ij->i", lower, lower) - diag)))
        if err > RECONSTRUCTION_TOL * scale:
            raise NotPSDError(f"diagonal reconstruction error {err:.3g}")
        return CholeskyFactor(lower, 0.0, trace, n, err)

    for jitter in (0.0,) + JITTERS:
        work = theta + jitter * np.eye(n) if jitter else theta.copy()
        try:
            lower = linalg.cholesky(work, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if not _min_pivot_ok(lower, scale):
            continue
        err = float(np.max(np.abs(lower @ lower.T - theta)))
        if err <= RECONSTRUCTION_TOL * float(np.max(np.abs(theta))):
            return CholeskyFactor(lower, jitter, trace, n, err)
    raise NotPSDError(f"theta is indefinite beyond the jitter budget {JITTERS[-1]:g}")


def _zero_upper(lower: np.ndarray, block: int = 1024) -> None:
    # LAPACK leaves the strict upper triangle untouched; clear it in row blocks
    n = lower.shape[0]
    cols = np.arange(n)[None, :]
    for start in range(0, n, block):
        stop = min(start + block, n)
        lower[start:stop][cols > np.arange(start, stop)[:, None]] = 0.0


# -- random streams --------------------------------------------------------

def replica_generator(seed: int, replica: int) -> np.random.Generator:
    """Independent stream for (seed, replica) from a counter-based bit generator."""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1), counter=[0, 0, 0, int(replica)]))


def _normals(seed: int, first: int, count: int, n: int) -> np.ndarray:
    out = np.empty((count, n))
    for r in range(count):
        out[r] = replica_generator(seed, first + r).standard_normal(n)
    return out


# -- Monte Carlo of V_n ----------------------------------------------------

@dataclass(frozen=True)
class McRun:
    model_id: str
    n: int
    reps: int
    seed: int
    samples: np.ndarray
    ks_distance: float
    empirical_mean: float
    empirical_var: float

    def csv_row(self, model: CovarianceModel | None = None) -> dict:
        return {
            "model": model.label if model else self.model_id,
            "params": model.params_str() if model else "",
            "n": self.n,
            "reps": self.reps,
            "seed": self.seed,
            "ks": self.ks_distance,
            "emp_mean": self.empirical_mean,
            "emp_var": self.empirical_var,
        }


def ks_distance(samples) -> float:
    """Two-sided Kolmogorov distance between the empirical CDF and Phi."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    m = x.size
    if m == 0:
        raise DomainError("samples must be non-empty")
    cdf = ndtr(x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def _increment_chunks(factor: CholeskyFactor, reps: int, seed: int):
    lt = np.ascontiguousarray(factor.lower.T)
    for start in range(0, reps, SAMPLE_CHUNK):
        count = min(SAMPLE_CHUNK, reps - start)
        yield start, _normals(seed, start, count, factor.n) @ lt


def sample_increments(factor: CholeskyFactor, reps: int, seed: int) -> np.ndarray:
    """``reps`` x n array of increment vectors L z, one row per replica."""
    return np.concatenate([x for _, x in _increment_chunks(factor, reps, seed)])


def sample_vn(factor: CholeskyFactor, sigma_n: float, reps: int, seed: int, *, model_id: str = "") -> McRun:
    """V_n = (|L z|^2 - trace) / sigma_n for ``reps`` independent z."""
    if reps < 1:
        raise DomainError("reps must be positive")
    n = factor.n
    out = np.empty(reps)
    for start, x in _increment_chunks(factor, reps, seed):
        out[start:start + x.shape[0]] = (np.einsum("ij,ij->i", x, x) - factor.trace) / sigma_n
    mean = float(np.mean(out))
    var = float(np.var(out, ddof=1)) if reps > 1 else 0.0
    return McRun(model_id, n, reps, int(seed), out, ks_distance(out), mean, var)


def simulate(model: CovarianceModel, n: int, reps: int, seed: int, *, max_n: int = DEFAULT_MAX_N) -> McRun:
    inc = increment_covariance(model, n, max_n=max_n)
    factor = cholesky_factor(inc)
    return sample_vn(factor, math.sqrt(sigma_n_sq(inc)), reps, seed, model_id=f"{model.label}({model.params_str()})")


def write_samples(path, run: McRun) -> None:
    """Little-endian binary: magic, then n, reps, seed as uint64, then float64 samples."""
    with open(path, "wb") as fh:
        fh.write(SAMPLES_MAGIC)
        fh.write(struct.pack("<QQQ", run.n, run.reps, run.seed & (2 ** 64 - 1)))
        fh.write(np.asarray(run.samples, dtype="<f8").tobytes())


def read_samples(path) -> tuple[int, int, int, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != SAMPLES_MAGIC:
            raise DomainError(f"{path}: not a samples file")
        n, reps, seed = struct.unpack("<QQQ", fh.read(24))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != reps:
        raise DomainError(f"{path}: expected {reps} samples, found {data.size}")
    return n, reps, seed, data.astype(np.float64)


# -- ASCLT -----------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    target: float


def _gauss_expectation(fn: Callable[[float], float]) -> float:
    dens = lambda x: fn(x) * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    lo, _ = quad(dens, -np.inf, 0.0, epsabs=1e-12, limit=200)
    hi, _ = quad(dens, 0.0, np.inf, epsabs=1e-12, limit=200)
    return lo + hi


PHI_LIBRARY = {
    "one": TestFunction("one", lambda v: np.ones_like(v), 1.0),
    "indicator_nonpositive": TestFunction("indicator_nonpositive", lambda v: (v <= 0).astype(float), 0.5),
    "cos": TestFunction("cos", np.cos, math.exp(-0.5)),
    "square": TestFunction("square", np.square, 1.0),
}


def test_function(phi) -> TestFunction:
    """Library name, TestFunction, or a vectorized callable (target by quadrature)."""
    if isinstance(phi, TestFunction):
        return phi
    if isinstance(phi, str):
        try:
            return PHI_LIBRARY[phi]
        except KeyError:
            raise DomainError(f"unknown test function {phi!r}; choose from {sorted(PHI_LIBRARY)}") from None
    if callable(phi):
        target = _gauss_expectation(lambda x: float(phi(np.asarray(x))))
        return TestFunction(getattr(phi, "__name__", "custom"), phi, target)
    raise DomainError("phi must be a name or a callable")


test_function.__test__ = False
TestFunction.__test__ = False


@dataclass(frozen=True)
class AscltResult:
    n: int
    phi_id: str
    log_average: float
    target: float
    weight_sum: float
    seed: int


@dataclass(frozen=True)
class PathFactor:
    """Everything a single-path ASCLT run needs: L, the diagonal of theta and sigma_k.

    ``lower`` is a vector of standard deviations when theta is diagonal.
    """

    lower: np.ndarray
    diag: np.ndarray
    sigma: np.ndarray
    n: int


def theta_matrix(model: CovarianceModel, n: int, *, block: int = 512) -> np.ndarray:
    """Theta alone, filled block by block (no separate gamma or Toeplitz copies)."""
    if model.kind is ModelKind.FBM:
        return linalg.toeplitz(rho_row(model.hurst_h, n))
    out = np.empty((n, n))
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        out[i0:i1] = theta_block(model, i0, i1, n)
    # symmetrize in place, one block pair at a time
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        for j0 in range(i0, n, block):
            j1 = min(j0 + block, n)
            avg = 0.5 * (out[i0:i1, j0:j1] + out[j0:j1, i0:i1].T)
            out[i0:i1, j0:j1] = avg
            out[j0:j1, i0:i1] = avg.T
    return out


def path_factor(model: CovarianceModel, n: int) -> PathFactor:
    if n < 2:
        raise DomainError("the log average needs n >= 2")
    if n > ASCLT_MAX_N:
        raise SizeLimitError(f"n={n} above the path cap {ASCLT_MAX_N}")
    theta = theta_matrix(model, n)
    sigma = np.sqrt(_kernels.nested_sigma_sq(theta))
    diag = np.diagonal(theta).copy()
    if np.count_nonzero(theta) == np.count_nonzero(diag):
        return PathFactor(np.sqrt(diag), diag, sigma, n)
    factor = cholesky_factor(theta, overwrite=True)
    return PathFactor(factor.lower, diag, sigma, n)


def asclt_average(model: CovarianceModel, n: int, phi, seed: int, *, factor: PathFactor | None = None) -> AscltResult:
    """(1/log n) sum_{k<=n} phi(V_k)/k along one sampled path."""
    tf = test_function(phi)
    pf = factor if factor is not None else path_factor(model, n)
    if pf.n != n:
        raise DomainError("factor size does not match n")
    z = replica_generator(seed, 0).standard_normal(n)
    x = pf.lower * z if pf.lower.ndim == 1 else pf.lower @ z
    v = np.cumsum(x * x - pf.diag) / pf.sigma
    k = np.arange(1, n + 1, dtype=np.float64)
    log_n = math.log(n)
    vals = np.asarray(tf.fn(v), dtype=np.float64)
    avg = math.fsum(vals / k) / log_n
    weights = math.fsum(1.0 / k) / log_n
    return AscltResult(n, tf.name, avg, tf.target, weights, int(seed))


def asclt_averages(model: CovarianceModel, n: int, phi, seeds) -> list[AscltResult]:
    """One factorization shared by several independent paths."""
    pf = path_factor(model, n)
    return [asclt_average(model, n, phi, s, factor=pf) for s in seeds]
