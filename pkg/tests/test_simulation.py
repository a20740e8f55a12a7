import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from sievepanel.errors import InputError, OutOfDomain
from sievepanel.estimator import FitResult
from sievepanel.simulation import (
    BETA_69_CONST,
    DgpConfig,
    coverage_table,
    detection_proportions,
    gen_dgp,
    rmse,
    run_detection_experiment,
    simulate_detection,
)
from sievepanel.spline_basis import uniform_specs


def test_beta_density():
    assert BETA_69_CONST == 18018
    assert BETA_69_CONST == pytest.approx(1.0 / math.exp(math.lgamma(6) + math.lgamma(9) - math.lgamma(15)), rel=1e-12)
    from sievepanel.simulation import beta_density_6_9

    assert beta_density_6_9(0.0) == 0.0 and beta_density_6_9(1.0) == 0.0
    total, _ = sp_integrate.quad(beta_density_6_9, 0.0, 1.0, epsabs=1e-13)
    assert total == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(OutOfDomain):
        beta_density_6_9(1.2)


def test_dgp_deterministic_and_ranges():
    cfg = DgpConfig(30, 4, 1.0, seed=9)
    d1, t1 = gen_dgp(cfg, 2)
    d2, t2 = gen_dgp(cfg, 2)
    assert np.array_equal(d1.y, d2.y) and np.array_equal(d1.z, d2.z)
    d3, _ = gen_dgp(cfg, 3)
    assert not np.array_equal(d1.y, d3.y)
    assert t1.z_raw[:, :, 3].min() >= 0.0 and t1.z_raw[:, :, 3].max() <= 1.0
    assert d1.z.min() == 0.0 and d1.z.max() == 1.0


def test_dgp_response_identity():
    d, tr = gen_dgp(DgpConfig(20, 3, 0.7, seed=1))
    fs = tr.functions
    y = sum(fs[j](tr.z_raw[:, :, j]) for j in range(4)) + tr.alpha[:, None] + tr.eps
    np.testing.assert_allclose(d.y, y, atol=1e-12)
    np.testing.assert_allclose(tr.z_raw[:, :, 1] - tr.z_raw[:, :, 2], 0.0, atol=1.0)


def test_r_zero_all_linear():
    d, tr = gen_dgp(DgpConfig(20, 3, 0.0, seed=2))
    s = np.linspace(0, 1, 7)
    for j in range(4):
        vals = tr.raw(j, s)
        np.testing.assert_allclose(np.diff(vals, 2), 0.0, atol=1e-10)
        assert tr.beta(j) == pytest.approx(tr.slope(j), rel=1e-10)
        np.testing.assert_allclose(tr.centered(j, s), tr.slope(j) * (s - 0.5), atol=1e-10)


def test_beta_truth_is_projection():
    _, tr = gen_dgp(DgpConfig(50, 5, 1.0, seed=3))
    j = 2
    num, _ = sp_integrate.quad(lambda s: float(tr.raw(j, s)) * (s - 0.5), 0, 1, limit=200)
    assert tr.beta(j) == pytest.approx(12 * num, rel=1e-6)


def _oracle_fit(tr, p=4):
    specs = uniform_specs(p, 3, 4)
    u = [np.zeros(specs[j].nonlinear_dim) for j in range(p)]
    return FitResult(np.array([tr.slope(j) for j in range(p)]), u, frozenset(range(p)), 0.0, specs)


def test_rmse_perfect_and_zero_fit():
    d, tr = gen_dgp(DgpConfig(30, 4, 0.0, seed=4))
    assert rmse(_oracle_fit(tr), tr, d) < 1e-10
    zero = _oracle_fit(tr)
    zero.v[:] = 0.0
    total = sum(np.sum(tr.centered(j, d.z[:, :, j]) ** 2) for j in range(4))
    assert rmse(zero, tr, d) == pytest.approx(math.sqrt(total / d.nt), rel=1e-12)


def test_config_validation():
    with pytest.raises(InputError):
        DgpConfig(1, 3)
    with pytest.raises(InputError):
        DgpConfig(reps=0)
    with pytest.raises(InputError):
        DgpConfig(r=-1.0)


def test_single_rep_proportions():
    df = run_detection_experiment(DgpConfig(40, 4, 1.0, seed=1, reps=1))
    for col in ("SP", "CV", "AIC", "BIC"):
        assert df[col].iloc[0] in (0.0, 1.0)


def test_single_rep_coverage():
    out = simulate_detection(DgpConfig(40, 4, 1.0, seed=2, reps=1), criteria=("cv",), points=(0.25, 0.5))
    table = coverage_table(out)
    assert set(table["coverage"]) <= {0.0, 1.0}
    assert set(table["reps"]) == {1}
    assert len(table) == 4 + 8


def test_small_sample_path_misses_more():
    out = simulate_detection(DgpConfig(50, 3, 1.0, seed=0, reps=20), criteria=("bic",))
    assert detection_proportions(out)["SP"] < 0.95
