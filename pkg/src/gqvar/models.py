"""Covariance kernels, the fBm increment correlation and the increment Gram matrix.

Four closed-form families are supported (fBm, sub-fBm, bi-fBm and the
generalized sub-fBm) plus a tabulated kernel read from CSV. For every model
the increment covariance is split as ``theta = Toeplitz(rho) + gamma`` where
``rho`` is the stationary fBm part at the model's effective Hurst index.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import binom

from .errors import (
    InvalidCovarianceError,
    InvalidModelError,
    OutOfRangeError,
    SizeLimitError,
)

DEFAULT_MAX_N = 8192
# |r| above which rho switches to the series form
RHO_SERIES_CUTOFF = 3
_RHO_SERIES_TERMS = 32


class ModelKind(str, enum.Enum):
    FBM = "fbm"
    SUBFBM = "subfbm"
    BIFBM = "bifbm"
    GENSUBFBM = "gsfbm"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class TabulatedGrid:
    """Covariance values on the uniform grid ``0, step, ..., horizon``."""

    horizon: float
    step: float
    values: np.ndarray

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CovarianceModel:
    kind: ModelKind
    hurst_h: float
    h_prime: float | None = None
    k_param: float | None = None
    grid: TabulatedGrid | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (ModelKind.BIFBM, ModelKind.GENSUBFBM):
            hp, k = self.h_prime, self.k_param
            if hp is None or k is None:
                raise InvalidModelError(f"{kind.value} needs h_prime and k_param")
            if not 0.0 < hp < 1.0:
                raise InvalidModelError(f"h_prime must lie in (0, 1), got {hp}")
            if kind is ModelKind.BIFBM and not 0.0 < k <= 1.0:
                raise InvalidModelError(f"bi-fBm needs K in (0, 1], got {k}")
            if kind is ModelKind.GENSUBFBM and not 1.0 <= k < 2.0:
                raise InvalidModelError(f"generalized sub-fBm needs K in [1, 2), got {k}")
            if abs(self.hurst_h - hp * k) > 1e-12:
                raise InvalidModelError("hurst_h must equal h_prime * k_param")
        if not 0.0 < self.hurst_h < 1.0:
            raise InvalidModelError(f"effective Hurst index must lie in (0, 1), got {self.hurst_h}")
        if kind is ModelKind.TABULATED and self.grid is None:
            raise InvalidModelError("tabulated model needs a grid")

    @classmethod
    def fbm(cls, h: float) -> CovarianceModel:
        return cls(ModelKind.FBM, h)

    @classmethod
    def subfbm(cls, h: float) -> CovarianceModel:
        return cls(ModelKind.SUBFBM, h)

    @classmethod
    def bifbm(cls, h_prime: float, k: float) -> CovarianceModel:
        return cls(ModelKind.BIFBM, h_prime * k, h_prime, k)

    @classmethod
    def gensubfbm(cls, h_prime: float, k: float) -> CovarianceModel:
        if not 0.0 < h_prime * k < 1.0:
            raise InvalidModelError(f"generalized sub-fBm needs H'K in (0, 1), got {h_prime * k}")
        return cls(ModelKind.GENSUBFBM, h_prime * k, h_prime, k)

    @classmethod
    def tabulated(cls, grid: TabulatedGrid, hurst_h: float) -> CovarianceModel:
        return cls(ModelKind.TABULATED, hurst_h, grid=grid)

    @property
    def params(self) -> dict:
        if self.kind in (ModelKind.BIFBM, ModelKind.GENSUBFBM):
            return {"hp": self.h_prime, "k": self.k_param, "hurst": self.hurst_h}
        if self.kind is ModelKind.TABULATED:
            return {"hurst": self.hurst_h, "horizon": self.grid.horizon, "step": self.grid.step}
        return {"hurst": self.hurst_h}

    @property
    def label(self) -> str:
        return self.kind.value

    def params_str(self) -> str:
        return ";".join(f"{k}={v!r}" for k, v in self.params.items())


def fbm_cov(h, t, s, dtype=np.float64):
    t = np.asarray(t, dtype=dtype)
    s = np.asarray(s, dtype=dtype)
    two_h = dtype(2.0 * h)
    return 0.5 * (np.abs(t) ** two_h + np.abs(s) ** two_h - np.abs(t - s) ** two_h)


def _closed_form_cov(model: CovarianceModel, t, s, dtype):
    t = np.asarray(t, dtype=dtype)
    s = np.asarray(s, dtype=dtype)
    h2 = dtype(2.0 * model.hurst_h)
    kind = model.kind
    if kind is ModelKind.FBM:
        return fbm_cov(model.hurst_h, t, s, dtype)
    if kind is ModelKind.SUBFBM:
        return s ** h2 + t ** h2 - 0.5 * ((s + t) ** h2 + np.abs(t - s) ** h2)
    hp2 = dtype(2.0 * model.h_prime)
    k = dtype(model.k_param)
    base = (s ** hp2 + t ** hp2) ** k
    if kind is ModelKind.BIFBM:
        return 0.5 * (base - np.abs(t - s) ** h2)
    return base - 0.5 * ((t + s) ** h2 + np.abs(t - s) ** h2)


def _tabulated_cov(grid: TabulatedGrid, t, s):
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if np.any(t < 0) or np.any(s < 0) or np.any(t > grid.horizon) or np.any(s > grid.horizon):
        raise OutOfRangeError(f"query outside tabulated grid [0, {grid.horizon}]")
    last = grid.size - 1
    x = t / grid.step
    y = s / grid.step
    i = np.clip(np.floor(x).astype(np.int64), 0, max(last - 1, 0))
    j = np.clip(np.floor(y).astype(np.int64), 0, max(last - 1, 0))
    fx = x - i
    fy = y - j
    v = grid.values
    i1 = np.minimum(i + 1, last)
    j1 = np.minimum(j + 1, last)
    return (
        v[i, j] * (1 - fx) * (1 - fy)
        + v[i1, j] * fx * (1 - fy)
        + v[i, j1] * (1 - fx) * fy
        + v[i1, j1] * fx * fy
    )


def cov(model: CovarianceModel, t, s, *, dtype=np.float64):
    """Evaluate R(t, s); accepts scalars or broadcastable arrays."""
    if np.any(np.asarray(t) < 0) or np.any(np.asarray(s) < 0):
        raise OutOfRangeError("covariance is defined for t, s >= 0")
    if model.kind is ModelKind.TABULATED:
        out = _tabulated_cov(model.grid, t, s)
    else:
        out = _closed_form_cov(model, t, s, dtype)
    return out.item() if np.ndim(out) == 0 else out


def rho(h: float, r):
    """Increment autocovariance of fBm at integer lag ``r``.

    Uses the defining formula for ``|r| <= 3`` and a binomial expansion of
    ``(1 + 1/r)^(2h) + (1 - 1/r)^(2h) - 2`` beyond, which avoids the
    cancellation of the direct formula at large lags.
    """
    scalar = np.ndim(r) == 0
    r = np.abs(np.asarray(r, dtype=np.float64))
    two_h = 2.0 * h
    out = np.empty_like(r)
    near = r <= RHO_SERIES_CUTOFF
    rn = r[near]
    out[near] = 0.5 * ((rn + 1.0) ** two_h + np.abs(rn - 1.0) ** two_h - 2.0 * rn ** two_h)
    far = ~near
    if np.any(far):
        rf = r[far]
        x2 = 1.0 / (rf * rf)
        acc = np.zeros_like(rf)
        # Horner in x^2 from the highest term down
        for k in range(_RHO_SERIES_TERMS, 0, -1):
            acc = (acc + binom(two_h, 2 * k)) * x2
        out[far] = rf ** two_h * acc
    return float(out) if scalar else out


def rho_row(h: float, n: int) -> np.ndarray:
    return rho(h, np.arange(n))


def _mixed_second_difference(fun, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    i = rows[:, None]
    j = cols[None, :]
    return fun(i + 1, j + 1) - fun(i + 1, j) - fun(i, j + 1) + fun(i, j)


def _power_sum_term(model: CovarianceModel):
    hp2 = np.longdouble(2.0 * model.h_prime)
    k = np.longdouble(model.k_param)

    def fun(t, s):
        t = np.asarray(t, dtype=np.longdouble)
        s = np.asarray(s, dtype=np.longdouble)
        return (t ** hp2 + s ** hp2) ** k

    return fun


def gamma_block(model: CovarianceModel, i0: int, i1: int, n: int) -> np.ndarray:
    """Rows ``i0:i1`` of gamma = theta - Toeplitz(rho) for a closed-form model.

    Terms of R - R^B that depend on t alone or s alone drop out of the mixed
    second difference, so only the genuinely two-variable parts are differenced.
    """
    rows = np.arange(i0, i1)
    cols = np.arange(n)
    kind = model.kind
    h = model.hurst_h
    if kind is ModelKind.FBM:
        return np.zeros((i1 - i0, n))
    anti = rho(h, rows[:, None] + cols[None, :] + 1)
    if kind is ModelKind.SUBFBM:
        # -1/2 (t+s)^{2H} differences to -rho(i+j+1)
        return -anti
    power = _mixed_second_difference(_power_sum_term(model), rows, cols).astype(np.float64)
    if kind is ModelKind.BIFBM:
        return 0.5 * power
    return power - anti


def theta_block(model: CovarianceModel, i0: int, i1: int, n: int) -> np.ndarray:
    """Rows ``i0:i1`` of the n x n increment covariance."""
    if model.kind is ModelKind.TABULATED:
        _check_tabulated_span(model.grid, n)
        v = model.grid.values
        return v[i0 + 1:i1 + 1, 1:n + 1] - v[i0 + 1:i1 + 1, :n] - v[i0:i1, 1:n + 1] + v[i0:i1, :n]
    rows = np.arange(i0, i1)
    lags = np.abs(rows[:, None] - np.arange(n)[None, :])
    return rho(model.hurst_h, lags) + gamma_block(model, i0, i1, n)


def iter_theta_blocks(model: CovarianceModel, n: int, block: int = 512) -> Iterator[tuple[int, np.ndarray]]:
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        yield i0, theta_block(model, i0, i1, n)


def theta_by_second_difference(model: CovarianceModel, n: int) -> np.ndarray:
    """theta(i,j) = R(i+1,j+1) - R(i+1,j) - R(i,j+1) + R(i,j), evaluated literally."""
    idx = np.arange(n, dtype=np.float64)
    return _mixed_second_difference(lambda t, s: np.asarray(cov(model, t, s)), idx, idx)


@dataclass(frozen=True, eq=False)
class IncrementCovariance:
    n: int
    theta: np.ndarray
    rho_row: np.ndarray
    gamma: np.ndarray
    model: CovarianceModel | None = None

    def stationary_part(self) -> np.ndarray:
        return toeplitz(self.rho_row)

    def scaled(self, c: float) -> IncrementCovariance:
        """Increments of the process c * G."""
        c2 = c * c
        return IncrementCovariance(self.n, c2 * self.theta, c2 * self.rho_row, c2 * self.gamma, None)


def _check_tabulated_span(grid: TabulatedGrid, n: int) -> None:
    if abs(grid.step - 1.0) > 1e-12:
        raise InvalidModelError("increments need a tabulated grid with unit step")
    if n > grid.size - 1:
        raise OutOfRangeError(f"n={n} exceeds the {grid.size - 1} unit increments on the grid")


def increment_covariance(model: CovarianceModel, n: int, *, max_n: int = DEFAULT_MAX_N) -> IncrementCovariance:
    if n < 1:
        raise SizeLimitError("n must be at least 1")
    if n > max_n:
        raise SizeLimitError(f"n={n} above the dense size cap {max_n}")
    rr = rho_row(model.hurst_h, n)
    if model.kind is ModelKind.TABULATED:
        theta = theta_block(model, 0, n, n)
        theta = 0.5 * (theta + theta.T)
        scale = max(float(np.max(np.abs(theta))), 1e-300)
        if float(np.linalg.eigvalsh(theta)[0]) < -1e-8 * scale:
            raise InvalidCovarianceError("tabulated increments are not positive semidefinite")
        gamma = theta - toeplitz(rr)
    else:
        gamma = gamma_block(model, 0, n, n)
        gamma = 0.5 * (gamma + gamma.T)
        theta = toeplitz(rr) + gamma
    return IncrementCovariance(n, theta, rr, gamma, model)


# -- tabulated CSV ---------------------------------------------------------

def read_tabulated(path) -> TabulatedGrid:
    """Read ``T,<horizon>,step,<dt>`` followed by ``t,s,R`` rows (upper triangle)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidCovarianceError(f"{path}: empty file") from None
        if len(header) != 4 or header[0].strip() != "T" or header[2].strip() != "step":
            raise InvalidCovarianceError(f"{path}: header must be 'T,<horizon>,step,<dt>'")
        horizon, step = float(header[1]), float(header[3])
        if step <= 0 or horizon <= 0:
            raise InvalidCovarianceError(f"{path}: horizon and step must be positive")
        m = int(round(horizon / step)) + 1
        if abs((m - 1) * step - horizon) > 1e-9 * max(1.0, horizon):
            raise InvalidCovarianceError(f"{path}: horizon is not a multiple of step")
        values = np.full((m, m), np.nan)
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 3:
                raise InvalidCovarianceError(f"{path}:{lineno}: expected t,s,R")
            t, s, r = (float(x) for x in row)
            i, j = int(round(t / step)), int(round(s / step))
            if not (0 <= i < m and 0 <= j < m) or abs(i * step - t) > 1e-9 or abs(j * step - s) > 1e-9:
                raise InvalidCovarianceError(f"{path}:{lineno}: point ({t}, {s}) is off the grid")
            values[i, j] = r
            values[j, i] = r
    if np.isnan(values).any():
        raise InvalidCovarianceError(f"{path}: grid is incomplete")
    return TabulatedGrid(horizon, step, values)


def write_tabulated(path, grid: TabulatedGrid) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", repr(grid.horizon), "step", repr(grid.step)])
        for i in range(grid.size):
            for j in range(i, grid.size):
                w.writerow([repr(i * grid.step), repr(j * grid.step), repr(float(grid.values[i, j]))])


def tabulate(model: CovarianceModel, horizon: int, step: float = 1.0) -> TabulatedGrid:
    m = int(round(horizon / step)) + 1
    pts = np.arange(m) * step
    values = np.asarray(cov(model, pts[:, None], pts[None, :]), dtype=np.float64)
    return TabulatedGrid(float(horizon), float(step), values)


def sample_grid(model: CovarianceModel, horizon: float = 10.0, m: int = 21) -> np.ndarray:
    """Grid points used by the model sanity checks."""
    if model.kind is ModelKind.TABULATED:
        horizon = model.grid.horizon
    return np.linspace(0.0, horizon, m)


def check_model_invariants(model: CovarianceModel, *, atol: float = 1e-12) -> None:
    """Raise InvalidModelError unless R(0, s) = 0 and R is symmetric on a sample grid."""
    pts = sample_grid(model)
    r0 = np.asarray(cov(model, np.zeros_like(pts), pts))
    tt, ss = np.meshgrid(pts, pts, indexing="ij")
    vals = np.asarray(cov(model, tt, ss))
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.max(np.abs(r0)) > atol * scale:
        raise InvalidModelError("R(0, s) must vanish")
    if np.max(np.abs(vals - vals.T)) > atol * scale:
        raise InvalidModelError("R must be symmetric")


def describe(model: CovarianceModel) -> str:
    return f"{model.label}({model.params_str()})"

