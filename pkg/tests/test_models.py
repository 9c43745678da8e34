import math

import mpmath
import numpy as np
import pytest
from scipy.linalg import toeplitz

from gqvar.errors import InvalidCovarianceError, InvalidModelError, OutOfRangeError, SizeLimitError
from gqvar.models import (
    CovarianceModel as M,
    ModelKind,
    TabulatedGrid,
    check_model_invariants,
    cov,
    increment_covariance,
    read_tabulated,
    rho,
    rho_row,
    tabulate,
    theta_by_second_difference,
    write_tabulated,
)

ALL_MODELS = [
    M.fbm(0.3),
    M.fbm(0.7),
    M.subfbm(0.3),
    M.subfbm(0.6),
    M.bifbm(0.8, 0.75),
    M.bifbm(0.4, 0.5),
    M.gensubfbm(0.45, 1.5),
    M.gensubfbm(0.6, 1.2),
]


def test_brownian_covariance_is_min():
    assert cov(M.fbm(0.5), 1.0, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert cov(M.subfbm(0.5), 2.0, 3.0) == pytest.approx(2.0, abs=1e-15)


def test_bifbm_with_unit_k_is_fbm():
    pts = np.linspace(0, 5, 11)
    t, s = np.meshgrid(pts, pts)
    np.testing.assert_allclose(cov(M.bifbm(0.7, 1.0), t, s), cov(M.fbm(0.7), t, s), rtol=0, atol=1e-13)


@pytest.mark.parametrize(
    "build",
    [
        lambda: M.fbm(0.0),
        lambda: M.fbm(1.0),
        lambda: M.subfbm(1.2),
        lambda: M.bifbm(0.5, 1.5),
        lambda: M.bifbm(1.1, 0.5),
        lambda: M.gensubfbm(0.5, 0.9),
        lambda: M.gensubfbm(0.6, 2.0),
        lambda: M.gensubfbm(0.7, 1.5),
        lambda: M(ModelKind.BIFBM, 0.5, 0.8, 0.75),
        lambda: M(ModelKind.TABULATED, 0.5),
    ],
)
def test_invalid_parameters_rejected(build):
    with pytest.raises(InvalidModelError):
        build()


def test_rho_examples():
    for h in (0.1, 0.5, 0.9):
        assert rho(h, 0) == 1.0
    assert all(rho(0.5, r) == 0.0 for r in (1, 2, 17, 10 ** 6))
    assert rho(0.75, 1) == pytest.approx(0.5 * (2 ** 1.5 - 2), rel=1e-14)
    assert rho(0.7, -5) == rho(0.7, 5)


@pytest.mark.parametrize("h", [0.02, 0.2, 0.45, 0.55, 0.75, 0.9, 0.99])
def test_rho_matches_extended_precision(h):
    mpmath.mp.dps = 50
    hh = mpmath.mpf(h)
    for r in (1, 2, 3, 4, 5, 10, 63, 64, 65, 1000, 10 ** 5, 10 ** 8):
        exact = (abs(mpmath.mpf(r + 1)) ** (2 * hh) + abs(mpmath.mpf(r - 1)) ** (2 * hh) - 2 * mpmath.mpf(r) ** (2 * hh)) / 2
        assert rho(h, r) == pytest.approx(float(exact), rel=5e-14)


@pytest.mark.parametrize("h", [0.3, 0.7])
def test_rho_asymptotics(h):
    errs = [abs(rho(h, r) / (h * (2 * h - 1) * r ** (2 * h - 2)) - 1) for r in (10 ** 3, 10 ** 4, 10 ** 5)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01


def test_rho_sign():
    r = np.arange(1, 2000)
    assert np.all(rho(0.7, r) > 0)
    assert np.all(rho(0.3, r) < 0)


def test_increment_covariance_examples():
    inc = increment_covariance(M.fbm(0.5), 3)
    np.testing.assert_array_equal(inc.theta, np.eye(3))
    assert np.all(inc.gamma == 0)
    inc = increment_covariance(M.subfbm(0.5), 4)
    np.testing.assert_allclose(inc.theta, np.eye(4), atol=1e-14)
    np.testing.assert_allclose(inc.gamma, 0, atol=1e-14)
    inc = increment_covariance(M.fbm(0.7), 2)
    assert inc.theta[0, 1] == pytest.approx(0.5 * (2 ** 1.4 - 2), rel=1e-14)


@pytest.mark.parametrize("model", ALL_MODELS, ids=str)
def test_closed_form_theta_matches_second_difference(model):
    inc = increment_covariance(model, 64)
    oracle = theta_by_second_difference(model, 64)
    np.testing.assert_allclose(inc.theta, oracle, rtol=0, atol=1e-11)


@pytest.mark.parametrize("model", ALL_MODELS, ids=str)
def test_theta_symmetric_psd_and_split(model):
    inc = increment_covariance(model, 512)
    assert np.max(np.abs(inc.theta - inc.theta.T)) <= 1e-12
    assert np.linalg.eigvalsh(inc.theta)[0] >= -1e-8
    np.testing.assert_array_equal(inc.theta, toeplitz(inc.rho_row) + inc.gamma)
    if model.kind is ModelKind.FBM:
        assert np.max(np.abs(inc.gamma)) <= 1e-10


@pytest.mark.parametrize("model", ALL_MODELS, ids=str)
def test_model_invariants(model):
    check_model_invariants(model)
    assert cov(model, 0.0, 3.0) == 0.0 or abs(cov(model, 0.0, 3.0)) < 1e-14


def test_size_cap():
    with pytest.raises(SizeLimitError):
        increment_covariance(M.fbm(0.6), 100, max_n=64)
    with pytest.raises(SizeLimitError):
        increment_covariance(M.fbm(0.6), 0)


def test_rho_row_matches_rho():
    np.testing.assert_array_equal(rho_row(0.6, 5), rho(0.6, np.arange(5)))


def test_tabulated_round_trip(tmp_path):
    base = M.subfbm(0.6)
    grid = tabulate(base, 12)
    path = tmp_path / "grid.csv"
    write_tabulated(path, grid)
    assert path.read_text().splitlines()[0] == "T,12.0,step,1.0"
    back = read_tabulated(path)
    np.testing.assert_array_equal(back.values, grid.values)
    model = M.tabulated(back, 0.6)
    inc = increment_covariance(model, 12)
    np.testing.assert_allclose(inc.theta, increment_covariance(base, 12).theta, atol=1e-12)
    assert cov(model, 2.5, 3.0) == pytest.approx(0.5 * (cov(base, 2, 3) + cov(base, 3, 3)), rel=1e-12)


def test_tabulated_errors(tmp_path):
    model = M.tabulated(tabulate(M.fbm(0.6), 5), 0.6)
    with pytest.raises(OutOfRangeError):
        cov(model, 6.0, 1.0)
    with pytest.raises(OutOfRangeError):
        increment_covariance(model, 6)
    half = M.tabulated(tabulate(M.fbm(0.6), 5, 0.5), 0.6)
    with pytest.raises(InvalidModelError):
        increment_covariance(half, 3)
    bad = tmp_path / "bad.csv"
    bad.write_text("T,2,step,1\n0,0,0\n")
    with pytest.raises(InvalidCovarianceError):
        read_tabulated(bad)


def test_tabulated_not_psd_rejected():
    values = np.zeros((4, 4))
    values[1:, 1:] = -np.eye(3) + 0.0
    values = values + values.T
    grid = TabulatedGrid(3.0, 1.0, values)
    with pytest.raises(InvalidCovarianceError):
        increment_covariance(M.tabulated(grid, 0.5), 3)


def test_scaled_increments():
    inc = increment_covariance(M.subfbm(0.6), 8)
    sc = inc.scaled(2.0)
    np.testing.assert_allclose(sc.theta, 4 * inc.theta)
    assert math.isclose(sc.rho_row[0], 4.0)
