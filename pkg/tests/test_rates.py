import math

import pytest

from gqvar import rates as R
from gqvar.errors import DomainError, InsufficientDataError, OutOfTheoremError
from gqvar.models import CovarianceModel as M


def test_theoretical_exponents():
    assert R.theoretical_exponent(0.5) == (R.Regime.OPTIMAL_SQRT, -0.5, 0.0)
    regime, a, b = R.theoretical_exponent(0.7)
    assert regime is R.Regime.UPPER_34 and a == pytest.approx(-0.1) and b == 0.0
    assert R.theoretical_exponent(2 / 3) == (R.Regime.CRITICAL_23, -0.5, 2.0)
    assert R.theoretical_exponent(0.75) == (R.Regime.BOUNDARY_34, 0.0, -1.5)
    with pytest.raises(OutOfTheoremError):
        R.theoretical_exponent(0.8)
    with pytest.raises(OutOfTheoremError):
        R.theoretical_exponent(0.0)


def test_fit_pure_power():
    fit = R.fit_power_law([(2 ** k, (2 ** k) ** -0.5) for k in range(3, 10)])
    assert fit.exponent == pytest.approx(-0.5, abs=1e-12)
    assert fit.r_squared == 1.0


def test_fit_log_corrected():
    pts = [(2 ** k, (2 ** k) ** -0.5 * (k * math.log(2)) ** 2) for k in range(3, 10)]
    fit = R.fit_power_law(pts, with_log=True)
    assert fit.exponent == pytest.approx(-0.5, abs=1e-6)
    assert fit.log_power == pytest.approx(2.0, abs=1e-6)


def test_fit_constant():
    fit = R.fit_power_law([(n, 3.0) for n in (2, 4, 8, 16)])
    assert fit.exponent == pytest.approx(0.0, abs=1e-12)
    assert fit.prefactor == pytest.approx(3.0)


def test_fit_errors():
    with pytest.raises(InsufficientDataError):
        R.fit_power_law([(2, 1.0), (4, 1.0), (8, 1.0)])
    with pytest.raises(DomainError):
        R.fit_power_law([(2, 1.0), (4, 0.0), (8, 1.0), (16, 1.0)])
    with pytest.raises(DomainError):
        R.fit_power_law([(2, 1.0), (8, 1.0), (4, 1.0), (16, 1.0)])


def test_sharp_exponents():
    assert R.sharp_exponent(0.6, "kappa4") == (-1.0, 0.0)
    assert R.sharp_exponent(0.7, "kappa3")[0] == pytest.approx(-0.3)
    assert R.sharp_exponent(0.7, "kappa4")[0] == pytest.approx(-0.4)
    assert R.sharp_exponent(0.7, "m_stat")[0] == pytest.approx(-0.3)
    assert R.sharp_exponent(0.6, "ks") is None


def test_doubling():
    assert R.doubling(128, 1024) == [128, 256, 512, 1024]
    with pytest.raises(DomainError):
        R.doubling(8, 4)


def test_regime_check_m_stat():
    rep = R.regime_check(M.fbm(0.55), R.doubling(2 ** 7, 2 ** 13), "m_stat")
    assert rep["verdict"] == "PASS"
    assert rep["fitted"]["a"] == pytest.approx(-0.5, abs=0.05)
    assert set(rep) >= {"model", "params", "use", "points", "fitted", "theoretical", "verdict"}


def test_regime_check_kappa4_and_kappa3():
    rep = R.regime_check(M.fbm(0.6), R.doubling(2 ** 7, 2 ** 13), "kappa4")
    assert rep["fitted"]["a"] == pytest.approx(-1.0, abs=0.1)
    assert rep["verdict"] == "PASS"
    rep = R.regime_check(M.fbm(0.7), R.doubling(2 ** 7, 2 ** 13), "kappa3")
    assert rep["fitted"]["a"] <= -0.1 + 0.05
    assert rep["fitted"]["a"] == pytest.approx(-0.3, abs=0.1)
    assert rep["verdict"] == "PASS"


def test_regime_check_grades_planted_points():
    bad = [(n, n ** -0.3) for n in (128, 256, 512, 1024)]
    assert R.regime_check(M.fbm(0.55), None, "m_stat", points=bad)["verdict"] == "FAIL"
    info = R.regime_check(M.fbm(0.75), None, "m_stat", points=bad)
    assert info["verdict"] == "INFO"
    ks = R.regime_check(M.fbm(0.7), None, "ks", points=[(n, n ** -0.2) for n in (64, 128, 256, 512)])
    assert ks["proxy"] and ks["verdict"] == "PASS"


def test_regime_check_ks_small():
    rep = R.regime_check(M.fbm(0.55), [16, 32, 64, 128], "ks", reps=4000, seed=1)
    assert rep["proxy"] is True
    assert len(rep["points"]) == 4


def test_regime_check_rejects_bad_use():
    with pytest.raises(DomainError):
        R.regime_check(M.fbm(0.55), [8, 16, 32, 64], "kurtosis")


@pytest.mark.parametrize("h, expected", [(0.55, 1.0), (0.6, 1.0), (0.72, 6 * 0.72 - 3)])
def test_triple_sum_growth_regimes(h, expected):
    fit = R.triple_sum_growth(h, R.doubling(2 ** 10, 2 ** 14))
    assert fit.exponent == pytest.approx(expected, abs=0.1)
