import math

import numpy as np
import pytest
from scipy.stats import chi2, norm

from gqvar import simulation as sim
from gqvar.cumulants import report
from gqvar.errors import DomainError, NotPSDError, SizeLimitError
from gqvar.models import CovarianceModel as M, increment_covariance


def test_cholesky_identity_and_reconstruction():
    f = sim.cholesky_factor(np.eye(5))
    np.testing.assert_array_equal(f.lower, np.eye(5))
    inc = increment_covariance(M.fbm(0.7), 4)
    f = sim.cholesky_factor(inc)
    np.testing.assert_allclose(f.lower @ f.lower.T, inc.theta, rtol=0, atol=1e-12)
    assert f.jitter == 0.0
    assert np.allclose(f.lower, np.tril(f.lower))


def synthetic(eig):
    rng = np.random.default_rng(11)
    q, _ = np.linalg.qr(rng.standard_normal((len(eig), len(eig))))
    t = (q * np.asarray(eig)) @ q.T
    return 0.5 * (t + t.T)


def test_cholesky_jitter_for_roundoff_indefiniteness():
    f = sim.cholesky_factor(synthetic([-1e-12, 0.5, 1.0, 1.5, 2.0, 3.0]))
    assert f.jitter == 1e-10
    with pytest.raises(NotPSDError):
        sim.cholesky_factor(synthetic([-1e-3, 0.5, 1.0, 2.0]))


def test_in_place_factor_matches_copy():
    theta = increment_covariance(M.subfbm(0.6), 200).theta
    a = sim.cholesky_factor(theta.copy())
    work = theta.copy()
    b = sim.cholesky_factor(work, overwrite=True)
    np.testing.assert_allclose(a.lower, b.lower, rtol=0, atol=1e-13)
    assert np.shares_memory(b.lower, work)


def test_ks_examples():
    assert sim.ks_distance([0.0]) == 0.5
    m = 1000
    strat = norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    assert sim.ks_distance(strat) == pytest.approx(0.0005, abs=1e-12)
    z = np.random.default_rng(5).standard_normal(100000)
    assert sim.ks_distance(z) < 0.01
    with pytest.raises(DomainError):
        sim.ks_distance([])


def test_chi_square_variance():
    run = sim.simulate(M.fbm(0.5), 1, 100000, 42)
    assert run.empirical_var == pytest.approx(1.0, rel=0.03)


@pytest.mark.parametrize("model", [M.fbm(0.7), M.subfbm(0.3), M.gensubfbm(0.45, 1.5)], ids=str)
def test_unit_variance_within_cumulant_allowance(model):
    reps = 20000
    run = sim.simulate(model, 16, reps, 9)
    k4 = report(model, 16, method="dense").kappa4_v
    assert abs(run.empirical_var - 1) <= 5 * math.sqrt(k4 + 2) / math.sqrt(reps)
    assert abs(run.empirical_mean) <= 5 / math.sqrt(reps)
    assert 0.0 <= run.ks_distance <= 1.0


def test_deterministic_and_chunk_independent(monkeypatch):
    a = sim.simulate(M.bifbm(0.8, 0.75), 24, 5000, 123)
    b = sim.simulate(M.bifbm(0.8, 0.75), 24, 5000, 123)
    assert a.samples.tobytes() == b.samples.tobytes()
    monkeypatch.setattr(sim, "SAMPLE_CHUNK", 777)
    c = sim.simulate(M.bifbm(0.8, 0.75), 24, 5000, 123)
    np.testing.assert_allclose(c.samples, a.samples, rtol=1e-12, atol=1e-13)
    d = sim.simulate(M.bifbm(0.8, 0.75), 24, 5000, 124)
    assert not np.array_equal(d.samples, a.samples)


def test_replica_streams_are_prefix_stable():
    f = sim.cholesky_factor(increment_covariance(M.fbm(0.6), 8))
    few = sim.sample_vn(f, 1.0, 10, 3).samples
    many = sim.sample_vn(f, 1.0, 100, 3).samples
    np.testing.assert_array_equal(few, many[:10])


def test_empirical_covariance_matches_theta():
    inc = increment_covariance(M.subfbm(0.7), 8)
    reps = 100000
    x = sim.sample_increments(sim.cholesky_factor(inc), reps, 2024)
    emp = x.T @ x / reps
    se = np.sqrt((inc.theta ** 2 + np.outer(np.diag(inc.theta), np.diag(inc.theta))) / reps)
    assert np.all(np.abs(emp - inc.theta) <= 5 * se)


def test_ks_decreases_with_n():
    curves = [[sim.simulate(M.fbm(0.55), n, 20000, s).ks_distance for n in (64, 256, 1024)] for s in range(5)]
    monotone = sum(a > b > c for a, b, c in curves)
    assert monotone >= 4


def test_samples_file_round_trip(tmp_path):
    run = sim.simulate(M.fbm(0.6), 8, 50, 7)
    path = tmp_path / "s.bin"
    sim.write_samples(path, run)
    raw = path.read_bytes()
    assert raw[:4] == b"GQVS"
    assert len(raw) == 4 + 24 + 8 * 50
    n, reps, seed, data = sim.read_samples(path)
    assert (n, reps, seed) == (8, 50, 7)
    np.testing.assert_array_equal(data, run.samples)


def test_csv_row():
    run = sim.simulate(M.fbm(0.6), 8, 50, 7)
    assert tuple(run.csv_row(M.fbm(0.6))) == sim.CSV_FIELDS


def test_asclt_constant_phi_and_small_n():
    res = sim.asclt_average(M.fbm(0.6), 2, "one", 1)
    assert res.log_average == pytest.approx(1.5 / math.log(2), rel=1e-15)
    assert res.target == 1.0
    pf = sim.path_factor(M.subfbm(0.6), 2)
    z = sim.replica_generator(5, 0).standard_normal(2)
    x = pf.lower @ z
    v = np.cumsum(x * x - pf.diag) / pf.sigma
    want = (float(v[0] <= 0) + float(v[1] <= 0) / 2) / math.log(2)
    got = sim.asclt_average(M.subfbm(0.6), 2, "indicator_nonpositive", 5, factor=pf).log_average
    assert got == pytest.approx(want, rel=1e-15)


def test_brownian_path_mean_matches_exact_expectation():
    # E[1(V_k <= 0)] = P(chi2_k <= k) for Brownian increments, so the
    # expected log average is known exactly at every finite n
    n = 2 ** 14
    k = np.arange(1, n + 1)
    expected = math.fsum(chi2.cdf(k, k) / k) / math.log(n)
    pf = sim.path_factor(M.fbm(0.5), n)
    assert pf.lower.ndim == 1
    vals = np.array([sim.asclt_average(M.fbm(0.5), n, "indicator_nonpositive", s, factor=pf).log_average for s in range(2000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - expected) <= 4 * se


@pytest.mark.parametrize("n", [8, 100, 4096])
def test_weight_identity(n):
    res = sim.asclt_average(M.fbm(0.5), n, "one", 0)
    assert res.log_average == res.weight_sum
    assert 1.0 <= res.weight_sum <= 1.0 + 1.0 / math.log(n)


def test_nested_sigma_matches_reports():
    pf = sim.path_factor(M.gensubfbm(0.45, 1.5), 64)
    for k in (1, 5, 64):
        assert pf.sigma[k - 1] ** 2 == pytest.approx(report(M.gensubfbm(0.45, 1.5), k).sigma_n_sq, rel=1e-12)


def test_test_functions():
    assert sim.test_function("cos").target == pytest.approx(math.exp(-0.5))
    custom = sim.test_function(lambda v: np.abs(v))
    assert custom.target == pytest.approx(math.sqrt(2 / math.pi), rel=1e-9)
    with pytest.raises(DomainError):
        sim.test_function("nope")


def test_asclt_errors():
    with pytest.raises(DomainError):
        sim.asclt_average(M.fbm(0.6), 1, "one", 0)
    with pytest.raises(SizeLimitError):
        sim.path_factor(M.fbm(0.6), 2 ** 15)
