"""Exact second, third and fourth cumulants of the quadratic variation.

Everything here is a deterministic function of the increment covariance
theta: sigma_n^2 = 2 sum theta^2, the third cumulant is a trace of theta^3
and the fourth a Frobenius norm of theta^2. Stationary (fBm) inputs go
through O(n^2) Toeplitz kernels; everything else uses dense reductions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .errors import DivergentSeriesError, OrderingError, SizeLimitError
from .models import (
    DEFAULT_MAX_N,
    CovarianceModel,
    IncrementCovariance,
    ModelKind,
    increment_covariance,
    iter_theta_blocks,
    rho,
    rho_row,
)

MIXED_TRIPLE_CAP = 1024
MIXED_QUAD_CAP = 256

CSV_FIELDS = ("model", "params", "n", "sigma_n_sq", "kappa3_f", "kappa4_f", "kappa3_v", "kappa4_v", "m_stat")


@dataclass(frozen=True)
class CumulantReport:
    n: int
    sigma_n_sq: float
    kappa3_f: float
    kappa4_f: float
    kappa3_v: float
    kappa4_v: float
    m_stat: float

    @classmethod
    def from_sums(cls, n: int, sq_sum: float, triple: float, quad: float) -> CumulantReport:
        """Assemble from sum theta^2, sum theta theta theta and ||theta^2||_F^2."""
        sigma_sq = 2.0 * sq_sum
        k3f = 8.0 / n ** 1.5 * triple
        k4f = 48.0 / n ** 2 * quad
        k3v = n ** 1.5 * k3f / sigma_sq ** 1.5
        k4v = n ** 2 * k4f / sigma_sq ** 2
        return cls(n, sigma_sq, k3f, k4f, k3v, k4v, max(abs(k3v), k4v))

    def csv_row(self, model: CovarianceModel | None = None) -> dict:
        row = {"model": model.label if model else "", "params": model.params_str() if model else ""}
        row.update(asdict(self))
        return row


def sigma_n_sq(inc: IncrementCovariance) -> float:
    return 2.0 * _kernels.hadamard_sum(inc.theta, inc.theta)


def _square(theta: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(theta @ theta)


def kappa3(inc: IncrementCovariance) -> float:
    """Third cumulant of F_n = Z_n / sqrt(n) as sum((theta @ theta) * theta)."""
    n = inc.n
    return 8.0 / n ** 1.5 * _kernels.hadamard_sum(_square(inc.theta), inc.theta)


def kappa4(inc: IncrementCovariance) -> float:
    """Fourth cumulant of F_n through the contraction norm ||theta @ theta||_F^2."""
    n = inc.n
    sq = _square(inc.theta)
    return 48.0 / n ** 2 * _kernels.hadamard_sum(sq, sq)


def report_from_increments(inc: IncrementCovariance) -> CumulantReport:
    theta = np.ascontiguousarray(inc.theta)
    sq = _square(theta)
    return CumulantReport.from_sums(
        inc.n,
        _kernels.hadamard_sum(theta, theta),
        _kernels.hadamard_sum(sq, theta),
        _kernels.hadamard_sum(sq, sq),
    )


def _toeplitz_report(h: float, n: int) -> CumulantReport:
    rr = rho_row(h, n)
    triple, quad = _kernels.toeplitz_square_sums(rr, n)
    return CumulantReport.from_sums(n, rho_sq_lag_sum(h, n, rr), triple, quad)


def report(model: CovarianceModel, n: int, *, method: str = "auto", max_n: int = DEFAULT_MAX_N) -> CumulantReport:
    """Cumulant report for one (model, n).

    ``method="toeplitz"`` is exact for fBm only and runs in O(n^2) time and
    O(n) memory; ``"dense"`` builds theta and squares it. ``"auto"`` picks
    the Toeplitz path whenever the model is stationary.
    """
    if method == "auto":
        method = "toeplitz" if model.kind is ModelKind.FBM else "dense"
    if method == "toeplitz":
        if model.kind is not ModelKind.FBM:
            raise ValueError("the Toeplitz path needs stationary increments (fbm)")
        if n < 1:
            raise SizeLimitError("n must be at least 1")
        return _toeplitz_report(model.hurst_h, n)
    if method != "dense":
        raise ValueError(f"unknown method {method!r}")
    return report_from_increments(increment_covariance(model, n, max_n=max_n))


def sigma_n_sq_streamed(model: CovarianceModel, n: int, block: int = 512) -> float:
    """sigma_n^2 from row blocks of theta, without holding the n x n matrix."""
    parts = []
    for _, blk in iter_theta_blocks(model, n, block):
        blk = np.ascontiguousarray(blk)
        parts.append(_kernels.hadamard_sum(blk, blk))
    return 2.0 * math.fsum(parts)


# -- pure rho sums ---------------------------------------------------------

def rho_sq_lag_sum(h: float, n: int, rr: np.ndarray | None = None) -> float:
    """sum_{i,j<n} rho(i-j)^2 through the lag weights n - |r|, in O(n)."""
    if rr is None:
        rr = rho_row(h, n)
    lags = np.arange(1, n)
    return math.fsum(np.concatenate(([n * rr[0] ** 2], 2.0 * (n - lags) * rr[1:n] ** 2)))


@dataclass(frozen=True)
class SeriesEstimate:
    value: float
    partial: float
    tail_estimate: float
    tail_bound: float


def sigma_sq_series(h: float, r_max: int) -> SeriesEstimate:
    """2 sum_{r in Z} rho(r)^2, truncated at |r| <= r_max plus an integral tail."""
    if not 0.0 < h < 0.75:
        raise DivergentSeriesError(f"sum of rho^2 diverges for h >= 3/4 (h={h})")
    rr = rho(h, np.arange(1, r_max + 1))
    partial = 2.0 * (1.0 + 2.0 * math.fsum(rr * rr))
    # two-sided tail, 2 * 2 * int_{r_max}^inf (c x^{2h-2})^2 dx
    c = h * abs(2 * h - 1)
    integral = r_max ** (4 * h - 3) / (3 - 4 * h)
    tail = 4.0 * c * c * integral
    bound = 4.0 * (1.1 * c) ** 2 * integral
    return SeriesEstimate(partial + tail, partial, tail, bound)


def rho_triple_sum(h: float, n: int) -> float:
    """sum_{j,k,l<n} rho(j-k) rho(k-l) rho(j-l) by lag counting, O(n^2)."""
    return _kernels.lag_triple_sum(rho_row(h, n), n)


def rho_quad_sum(h: float, n: int, *, method: str = "recurrence") -> float:
    """sum_{i,j,k,l<n} rho(i-j) rho(i-k) rho(k-l) rho(j-l) = ||T^2||_F^2.

    ``"recurrence"`` walks the diagonals of T^2 in O(n^2); ``"dense"`` forms
    T^2 with a matrix product.
    """
    rr = rho_row(h, n)
    if method == "recurrence":
        return _kernels.toeplitz_square_sums(rr, n)[1]
    if method == "dense":
        from scipy.linalg import toeplitz

        sq = _square(toeplitz(rr))
        return _kernels.hadamard_sum(sq, sq)
    raise ValueError(f"unknown method {method!r}")


# -- mixed rho/gamma sums --------------------------------------------------

TRIPLE_NAMES = ("ggg", "ggr", "grr")
QUAD_NAMES = ("gggg", "gggr", "ggrr", "grrr")


def mixed_sums(inc: IncrementCovariance) -> dict[str, float]:
    """The seven mixed sums of the theta = rho + gamma expansion.

    Names list the factors in order, e.g. ``"ggr"`` is
    sum gamma(j,k) gamma(k,l) rho(j-l) and ``"gggr"`` is
    sum gamma(i,j) gamma(i,k) gamma(k,l) rho(j-l).
    """
    g = np.ascontiguousarray(inc.gamma)
    p = np.ascontiguousarray(inc.stationary_part())
    g2 = _square(g)
    p2 = _square(p)
    hs = _kernels.hadamard_sum
    return {
        "ggg": hs(g2, g),
        "ggr": hs(g2, p),
        "grr": hs(g, p2),
        "gggg": hs(g2, g2),
        "gggr": hs(g2, np.ascontiguousarray(p @ g)),
        "ggrr": hs(g2, p2),
        "grrr": hs(g, np.ascontiguousarray(p2 @ p)),
    }


def triple_envelope(h: float, n: int) -> float:
    return float(n) ** max(6 * h - 3, 0.0)


def quad_envelope(h: float, n: int) -> float:
    return float(n) ** max(8 * h - 4, 0.0)


@dataclass(frozen=True)
class MixedSumReport:
    n: int
    hurst: float
    sums: dict
    ratios: dict


def mixed_sum_bounds(
    inc: IncrementCovariance,
    *,
    hurst: float | None = None,
    triple_cap: int = MIXED_TRIPLE_CAP,
    quad_cap: int = MIXED_QUAD_CAP,
) -> MixedSumReport:
    """Each mixed sum divided by its power envelope at this n."""
    n = inc.n
    if n > min(triple_cap, quad_cap):
        raise SizeLimitError(f"n={n} above the mixed-sum cap {min(triple_cap, quad_cap)}")
    h = hurst if hurst is not None else inc.model.hurst_h
    sums = mixed_sums(inc)
    ratios = {}
    for name, value in sums.items():
        env = triple_envelope(h, n) if name in TRIPLE_NAMES else quad_envelope(h, n)
        ratios[name] = abs(value) / env
    return MixedSumReport(n, h, sums, ratios)


@dataclass(frozen=True)
class EnvelopeCheck:
    reports: list
    growth: dict
    passed: bool


def mixed_sum_envelopes(model: CovarianceModel, n_list, *, factor: float = 2.0) -> EnvelopeCheck:
    """Envelope ratios across ``n_list``; passes when no ratio exceeds
    ``factor`` times its value at the first n."""
    reps = [mixed_sum_bounds(increment_covariance(model, n)) for n in n_list]
    growth = {}
    ok = True
    for name in TRIPLE_NAMES + QUAD_NAMES:
        first = reps[0].ratios[name]
        worst = max(r.ratios[name] for r in reps)
        growth[name] = worst / first if first > 0 else (0.0 if worst == 0 else math.inf)
        ok &= worst <= factor * first or worst == 0.0
    return EnvelopeCheck(reps, growth, bool(ok))


def increment_power_sq_sum(h: float, n: int) -> float:
    """sum_{i<n} [(i+1)^h - i^h]^2."""
    i = np.arange(n, dtype=np.float64)
    a = (i + 1.0) ** h - i ** h
    return math.fsum(a * a)


def gamma_cube_bound(h: float, n: int, c_h_prime: float) -> float:
    """Upper bound (C'^3 / h^6) S(n)^3 on sum |gamma gamma gamma|."""
    return c_h_prime ** 3 / h ** 6 * increment_power_sq_sum(h, n) ** 3


# -- ASCLT condition (2) ---------------------------------------------------

def asclt_condition2_bound(model: CovarianceModel, k: int, l: int, *, max_n: int = DEFAULT_MAX_N) -> tuple[float, float]:
    """Return (|<f_k, f_l>|, sqrt(k/l) + (kl)^{(2H-1) v 0 - 1/2}) for 0 < k < l."""
    if not 0 < k < l:
        raise OrderingError(f"need 0 < k < l, got k={k}, l={l}")
    inc = increment_covariance(model, l, max_n=max_n)
    theta = inc.theta
    sq = theta * theta
    sigma_k = math.sqrt(2.0 * _kernels.hadamard_sum(np.ascontiguousarray(theta[:k, :k]), np.ascontiguousarray(theta[:k, :k])))
    sigma_l = math.sqrt(2.0 * math.fsum(sq.ravel()))
    cross = math.fsum(sq[:k, :l].ravel())
    h = model.hurst_h
    shape = math.sqrt(k / l) + (k * l) ** (max(2 * h - 1, 0.0) - 0.5)
    return cross / (sigma_k * sigma_l), shape
