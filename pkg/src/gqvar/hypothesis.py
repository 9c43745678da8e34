"""Numerical evidence for the structural assumption on R and two technical lemmas.

* ``psi_scan`` estimates the mixed partial of R - R^B by finite differences
  and fits the smallest constant C' with |Psi(t,s)| <= C' (ts)^(H-1).
* ``gamma_bound_check`` verifies the cell-wise bound on gamma that the fitted
  constant implies.
* ``increment_tail_bound_check``, ``stieltjes_identity_check`` and
  ``simplex_sum_check`` exercise the auxiliary inequalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .errors import ComplexityError, DomainError, UnsupportedFunctionError
from .models import CovarianceModel, IncrementCovariance, ModelKind, cov, fbm_cov

DEFAULT_STEP = 1e-4


@dataclass(frozen=True)
class PsiEstimate:
    t: float
    s: float
    psi: float
    bound: float
    step: float


@dataclass(frozen=True)
class PsiScan:
    estimates: list
    rejected: list
    fitted_constant: float
    c_h_prime: float
    passed: bool

    @property
    def max_ratio(self) -> float:
        return self.fitted_constant


def _difference_kernel(model: CovarianceModel) -> Callable:
    h = model.hurst_h
    # closed forms in extended precision; the stencil divides by 4 step^2
    dtype = np.float64 if model.kind is ModelKind.TABULATED else np.longdouble

    def diff(t, s):
        return np.asarray(cov(model, t, s, dtype=dtype), dtype=dtype) - fbm_cov(h, t, s, dtype)

    return diff


def psi_estimate(model: CovarianceModel, t, s, step: float = DEFAULT_STEP):
    """Centered four-point mixed difference of R - R^B at (t, s)."""
    d = _difference_kernel(model)
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    num = d(t + step, s + step) - d(t + step, s - step) - d(t - step, s + step) + d(t - step, s - step)
    out = np.asarray(num / (4.0 * np.longdouble(step) ** 2), dtype=np.float64)
    return out.item() if out.ndim == 0 else out


def richardson_check(model: CovarianceModel, t: float, s: float, step: float = 1e-2) -> tuple[list, float]:
    """Estimates at step, step/2, step/4 and the ratio of successive changes
    (close to 4 for a second-order stencil)."""
    vals = [psi_estimate(model, t, s, step / 2 ** k) for k in range(3)]
    d1, d2 = vals[0] - vals[1], vals[1] - vals[2]
    ratio = d1 / d2 if d2 != 0 else math.inf
    return vals, ratio


def default_scan_grid(step: float = DEFAULT_STEP) -> list[tuple[float, float]]:
    """Log-spaced (t, s) pairs spanning s/t in [1e-3, 1e3], plus the closest
    admissible pairs on either side of the diagonal."""
    ts = np.geomspace(0.1, 10.0, 9)
    qs = np.geomspace(1e-3, 1e3, 49)
    grid = []
    for t in ts:
        for q in qs:
            grid.append((float(t), float(t * q)))
        for k in (3.0, 10.0, 30.0, 100.0):
            grid.append((float(t), float(t + k * step)))
            grid.append((float(t), float(t - k * step)))
    return grid


def psi_scan(
    model: CovarianceModel,
    c_h_prime: float | None = None,
    grid: Sequence[tuple[float, float]] | None = None,
    step: float = DEFAULT_STEP,
) -> PsiScan:
    """Scan |Psi| against (ts)^(H-1) over ``grid``.

    Points with t or s not positive, within ``2 * step`` of the diagonal, or
    too close to the origin for the stencil are reported in ``rejected``.
    When ``c_h_prime`` is None the fitted constant is used as the bound.
    """
    if grid is None:
        grid = default_scan_grid(step)
    pts = np.asarray(grid, dtype=np.float64).reshape(-1, 2)
    t, s = pts[:, 0], pts[:, 1]
    ok = (t > step) & (s > step) & (np.abs(t - s) > 2 * step)
    if model.kind is ModelKind.TABULATED:
        ok &= (t + step <= model.grid.horizon) & (s + step <= model.grid.horizon)
    rejected = [(float(a), float(b)) for a, b in pts[~ok]]
    t, s = t[ok], s[ok]
    h = model.hurst_h
    psi = np.atleast_1d(psi_estimate(model, t, s, step)) if t.size else np.empty(0)
    weight = (t * s) ** (1.0 - h)
    ratios = np.abs(psi) * weight
    fitted = float(np.max(ratios)) if ratios.size else 0.0
    c = fitted if c_h_prime is None else float(c_h_prime)
    estimates = [
        PsiEstimate(float(a), float(b), float(p), c / float(w), step) for a, b, p, w in zip(t, s, psi, weight)
    ]
    return PsiScan(estimates, rejected, fitted, c, fitted <= c)


# -- gamma bound -----------------------------------------------------------

def increment_powers(h: float, n: int) -> np.ndarray:
    """(i+1)^h - i^h for i = 0..n-1, computed without cancellation."""
    i = np.arange(n, dtype=np.float64)
    out = np.empty(n)
    out[0] = 1.0
    ii = i[1:]
    out[1:] = ii ** h * np.expm1(h * np.log1p(1.0 / ii))
    return out


@dataclass(frozen=True)
class GammaBoundReport:
    n: int
    hurst: float
    max_ratio: float
    argmax: tuple
    fitted_constant: float
    c_h_prime: float
    passed: bool


def gamma_bound_check(inc: IncrementCovariance, c_h_prime: float, *, hurst: float | None = None) -> GammaBoundReport:
    """|gamma(i,j)| <= (C'/H^2) a_i a_j with a_i = (i+1)^H - i^H.

    ``max_ratio`` is max |gamma| / (a_i a_j); the smallest admissible C' is
    ``max_ratio * H^2``.
    """
    h = hurst if hurst is not None else inc.model.hurst_h
    a = increment_powers(h, inc.n)
    ratio = np.abs(inc.gamma) / np.outer(a, a)
    idx = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    mx = float(ratio[idx])
    fitted = mx * h ** 2
    return GammaBoundReport(inc.n, h, mx, (int(idx[0]), int(idx[1])), fitted, float(c_h_prime), fitted <= c_h_prime)


# -- increment tail --------------------------------------------------------

@dataclass(frozen=True)
class TailBoundReport:
    h: float
    n: int
    pointwise_ok: bool
    worst_pointwise: float
    sizes: list
    ratios: list
    informational: bool
    passed: bool


def increment_tail_bound_check(h: float, n: int) -> TailBoundReport:
    """Check (i+1)^h - i^h <= h i^(h-1) for 1 <= i < n, and the growth of
    S(m) = h^-2 sum_{i<m} [(i+1)^h - i^h]^2 against m^((2h-1) v 0) over
    doublings m = 2^8, ..., n (starting lower when n is small).

    The ratio sequence counts as bounded when its successive changes do not
    grow. At h = 1/2 the sum grows like log m; the report is informational.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    a = increment_powers(h, n)
    i = np.arange(1, n, dtype=np.float64)
    lhs = a[1:]
    rhs = h * i ** (h - 1.0)
    excess = lhs / rhs - 1.0
    pointwise_ok = bool(np.all(excess <= 1e-14))
    start = 8 if n >= 2 ** 9 else 1
    sizes = []
    m = 2 ** start
    while m <= n:
        sizes.append(m)
        m *= 2
    if not sizes:
        sizes = [n]
    cum = np.cumsum(a * a) / h ** 2
    expo = max(2 * h - 1, 0.0)
    ratios = [float(cum[m - 1] / m ** expo) for m in sizes]
    steps = np.abs(np.diff(ratios))
    shrinking = bool(np.all(steps[1:] <= steps[:-1] * (1 + 1e-9))) if steps.size > 1 else True
    informational = abs(h - 0.5) < 1e-12
    passed = pointwise_ok and (informational or (shrinking and all(map(math.isfinite, ratios))))
    return TailBoundReport(h, n, pointwise_ok, float(np.max(excess)), sizes, ratios, informational, passed)


# -- integration by parts against a step-function measure ------------------

@dataclass(frozen=True)
class StepFunction:
    """Finite sum of value * 1_[u, v)."""

    pieces: tuple = ()

    def __post_init__(self):
        norm = []
        for piece in self.pieces:
            if len(piece) != 3:
                raise UnsupportedFunctionError("step pieces are (u, v, value) triples")
            u, v, val = (float(x) for x in piece)
            if not (math.isfinite(u) and math.isfinite(v) and math.isfinite(val)) or u >= v:
                raise UnsupportedFunctionError(f"bad step piece {piece!r}")
            norm.append((u, v, val))
        object.__setattr__(self, "pieces", tuple(norm))

    @classmethod
    def indicator(cls, u: float, v: float, value: float = 1.0) -> StepFunction:
        return cls(((u, v, value),))

    def __call__(self, x: float) -> float:
        return sum(val for u, v, val in self.pieces if u <= x < v)

    def breakpoints(self) -> list[float]:
        return sorted({p for u, v, _ in self.pieces for p in (u, v)})


@dataclass(frozen=True)
class StepMeasure:
    atoms: tuple = field(default_factory=tuple)


def step_measure(f: StepFunction, a: float, b: float) -> StepMeasure:
    """Jumps of f restricted to [a, b) and extended by zero, as signed atoms on [a, b]."""
    if not isinstance(f, StepFunction):
        raise UnsupportedFunctionError("only StepFunction inputs have an atomic measure")

    def f0(x):
        return f(x) if a <= x < b else 0.0

    pts = sorted({min(max(p, a), b) for p in f.breakpoints()} | {a, b})
    atoms = []
    for p in pts:
        # f0 is right-continuous; the left limit is its value just below p
        left = _left_limit(f0, p, pts)
        mass = f0(p) - left
        if mass != 0.0:
            atoms.append((p, mass))
    return StepMeasure(tuple(atoms))


def _left_limit(f0, p, pts):
    below = [q for q in pts if q < p]
    if not below:
        return 0.0
    return f0(0.5 * (below[-1] + p))


def adaptive_simpson(fun: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, eps, depth):
        x1 = 0.5 * (x0 + x2)
        fl = fun(0.5 * (x0 + x1))
        fr = fun(0.5 * (x1 + x2))
        left = simpson(x0, x1, f0, fl, f1)
        right = simpson(x1, x2, f1, fr, f2)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(x0, x1, f0, fl, f1, left, eps / 2, depth - 1) + recurse(
            x1, x2, f1, fr, f2, right, eps / 2, depth - 1
        )

    if hi <= lo:
        return 0.0
    f0, f1, f2 = fun(lo), fun(0.5 * (lo + hi)), fun(hi)
    return recurse(lo, hi, f0, f1, f2, simpson(lo, hi, f0, f1, f2), tol, max_depth)


@dataclass(frozen=True)
class StieltjesResult:
    lhs: float
    rhs: float
    residual: float
    measure: StepMeasure


def stieltjes_identity_check(
    f: StepFunction,
    phi: Callable[[float], float],
    dphi: Callable[[float], float],
    a: float,
    b: float,
    *,
    tol: float = 1e-10,
) -> StieltjesResult:
    """Compare -int_a^b f phi' dt with int phi d(nu_f)."""
    if not isinstance(f, StepFunction):
        raise UnsupportedFunctionError("f must be a StepFunction")
    if not b > a:
        raise DomainError("need a < b")
    measure = step_measure(f, a, b)
    lhs = 0.0
    for u, v, val in f.pieces:
        lo, hi = max(u, a), min(v, b)
        if hi > lo:
            lhs -= val * adaptive_simpson(dphi, lo, hi, tol)
    rhs = math.fsum(m * phi(x) for x, m in measure.atoms)
    return StieltjesResult(lhs, rhs, abs(lhs - rhs), measure)


# -- simplex sums ----------------------------------------------------------

@dataclass(frozen=True)
class SimplexReport:
    v: tuple
    r_values: tuple
    sums: list
    ratios: list
    dirichlet_constant: float
    bounds: list
    non_increasing_tail: bool
    passed: bool


def dirichlet_constant(v: Sequence[float]) -> float:
    """Volume integral of prod x_i^(v_i - 1) over the unit simplex."""
    v = list(v)
    return math.exp(sum(gammaln(x) for x in v) - gammaln(1.0 + sum(v)))


def simplex_sum_check(v: Sequence[float], r_values: Sequence[int]) -> SimplexReport:
    """D(r) = sum over positive integers with sum r_i < r of prod r_i^(v_i - 1).

    Passes when every D(r) / r^(sum v) sits under the lattice-to-integral
    comparison bound C (r - 1 + m)^(sum v) / r^(sum v), with C the Dirichlet
    integral and m the number of exponents v_i > 1.
    """
    v = tuple(float(x) for x in v)
    l = len(v)
    if l > 3:
        raise ComplexityError(f"direct enumeration supports l <= 3, got l = {l}")
    if l == 0 or any(x <= 0 for x in v):
        raise DomainError("all exponents v_i must be positive")
    r_values = tuple(int(r) for r in r_values)
    if any(r < l + 1 for r in r_values) or any(b <= a for a, b in zip(r_values, r_values[1:])):
        raise DomainError("r_values must be increasing and each at least l + 1")
    total = sum(v)
    c = dirichlet_constant(v)
    m = sum(1 for x in v if x > 1.0)
    arr = np.asarray(v, dtype=np.float64)
    sums, ratios, bounds = [], [], []
    for r in r_values:
        d = _kernels.simplex_sum(arr, r)
        sums.append(d)
        ratios.append(d / r ** total)
        bounds.append(c * ((r - 1 + m) / r) ** total)
    ok = all(math.isfinite(x) and x <= b * (1 + 1e-12) for x, b in zip(ratios, bounds))
    tail = len(ratios) < 2 or ratios[-1] <= ratios[-2]
    return SimplexReport(v, r_values, sums, ratios, c, bounds, tail, ok)


# -- report records --------------------------------------------------------

def check_record(check: str, model: CovarianceModel | None, fitted: float, max_ratio: float, passed: bool) -> dict:
    return {
        "check": check,
        "model": model.label if model is not None else None,
        "params": model.params if model is not None else {},
        "fitted_constant": fitted,
        "max_ratio": max_ratio,
        "pass": bool(passed),
    }


def run_hypothesis_suite(model: CovarianceModel, n: int = 512, *, step: float = DEFAULT_STEP) -> list[dict]:
    """psi scan, gamma bound with the fitted constant, and the increment tail check."""
    from .models import increment_covariance

    scan = psi_scan(model, None, step=step)
    inc = increment_covariance(model, n)
    gb = gamma_bound_check(inc, scan.fitted_constant)
    tail = increment_tail_bound_check(model.hurst_h, n)
    return [
        check_record("psi_scan", model, scan.fitted_constant, scan.max_ratio, scan.passed),
        check_record("gamma_bound", model, gb.fitted_constant, gb.max_ratio, gb.passed),
        check_record("increment_tail", model, None, max(tail.ratios), tail.passed),
    ]
