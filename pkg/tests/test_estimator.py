import numpy as np
import pytest

from conftest import dense_ls, small_design
from sievepanel.errors import ShapeMismatch
from sievepanel.estimator import (
    WithinProblem,
    fit_penalized_lqa,
    fit_unpenalized,
    nt_inner,
    nt_norm,
    objective,
    solve_gram,
)
from sievepanel.panel_data import PanelDataset
from sievepanel.penalty import ScadParams, scad_value
from sievepanel.simulation import DgpConfig, gen_dgp
from sievepanel.spline_basis import build_design, uniform_specs


def test_nt_inner_hand_value():
    g = np.array([[1.0, 3.0]])
    assert nt_inner(g, g) == pytest.approx(1.0, abs=1e-15)
    assert nt_inner(g, np.array([[2.0, 2.0]])) == 0.0
    with pytest.raises(ShapeMismatch):
        nt_inner(g, np.ones((2, 2)))


def test_nt_inner_bilinear():
    rng = np.random.default_rng(0)
    g1, g2, f = rng.normal(size=(3, 5, 4))
    lhs = nt_inner(2 * g1 - 3 * g2, f)
    assert lhs == pytest.approx(2 * nt_inner(g1, f) - 3 * nt_inner(g2, f), abs=1e-12)
    assert nt_norm(g1) >= 0


def test_objective_simple_cases():
    rng = np.random.default_rng(1)
    d, des = small_design(rng, 6, 3, 2)
    zero_u = [np.zeros(b.shape[1]) for b in des.nonlinear]
    assert objective(des, d.y, np.zeros(2), zero_u, ScadParams(0.0)) == pytest.approx(nt_norm(d.y) ** 2, rel=1e-12)
    fit = fit_unpenalized(des, d.y)
    y_fit = fit.fitted(des)
    assert objective(des, y_fit, fit.v, fit.u, ScadParams(0.0)) < 1e-20


def test_objective_plateau_penalty():
    rng = np.random.default_rng(2)
    d, des = small_design(rng, 6, 3, 2)
    fit = fit_unpenalized(des, d.y)
    params = ScadParams(1e-3)
    norms = [nt_norm((b @ u).reshape(6, 3)) for b, u in zip(des.nonlinear, fit.u)]
    assert min(norms) > 3.7 * 1e-3
    got = objective(des, d.y, fit.v, fit.u, params) - objective(des, d.y, fit.v, fit.u, ScadParams(0.0))
    assert got == pytest.approx(2 * 4.7 * 1e-6 / 2, rel=1e-10)
    assert got == pytest.approx(float(np.sum(scad_value(np.array(norms), params))), rel=1e-12)


def test_unpenalized_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n, t, p = rng.integers(20, 40), rng.integers(3, 6), rng.integers(1, 4)
        d, des = small_design(rng, n, t, p)
        fit = fit_unpenalized(des, d.y)
        oracle = dense_ls(des.full(), d.y.reshape(-1), n, t)
        assert np.max(np.abs(fit.coef() - oracle)) < 1e-8


def test_restricted_fit_drops_blocks():
    rng = np.random.default_rng(4)
    d, des = small_design(rng, 10, 3, 3)
    fit = fit_unpenalized(des, d.y, restrict={0, 2})
    assert not np.any(fit.u[0]) and not np.any(fit.u[2]) and np.any(fit.u[1])
    assert fit.linear_set == frozenset({0, 2})
    keep = [0, 1, 2] + list(range(*des.block_slices()[1].indices(des.full().shape[1])))
    oracle = dense_ls(des.full()[:, keep], d.y.reshape(-1), 10, 3)
    np.testing.assert_allclose(np.concatenate([fit.v, fit.u[1]]), oracle, atol=1e-8)
    lin = fit_unpenalized(des, d.y, restrict={0, 1, 2})
    np.testing.assert_allclose(lin.v, dense_ls(des.linear, d.y.reshape(-1), 10, 3), atol=1e-10)


def test_noiseless_linear_recovery():
    rng = np.random.default_rng(5)
    z = rng.uniform(size=(30, 4, 1))
    z[0, 0, 0], z[0, 1, 0] = 0.0, 1.0
    alpha = rng.normal(size=(30, 1)) * 3
    d = PanelDataset(y=2 * (z[:, :, 0] - 0.5) + alpha, z=z)
    des = build_design(d, uniform_specs(1, 3, 4))
    fit = fit_unpenalized(des, d.y)
    assert abs(fit.v[0] - 2.0) < 1e-8
    assert np.max(np.abs(fit.u[0])) < 1e-8


def test_lqa_zero_lambda_is_unpenalized():
    rng = np.random.default_rng(6)
    for _ in range(20):
        n, t, p = rng.integers(20, 40), rng.integers(3, 6), rng.integers(1, 4)
        d, des = small_design(rng, n, t, p)
        a = fit_penalized_lqa(des, d.y, ScadParams(0.0))
        oracle = dense_ls(des.full(), d.y.reshape(-1), n, t)
        assert np.max(np.abs(a.coef() - oracle)) < 1e-6


def test_lqa_objective_monotone():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n, t, p = rng.integers(10, 25), rng.integers(2, 5), rng.integers(1, 4)
        d, des = small_design(rng, n, t, p, noise=0.5)
        lam = float(np.exp(rng.uniform(-4, 0)))
        fit = fit_penalized_lqa(des, d.y, ScadParams(lam))
        trace = np.array(fit.objective_trace)
        assert np.all(np.diff(trace) <= 1e-8), trace


def test_hard_zero_permanent():
    rng = np.random.default_rng(8)
    d, des = small_design(rng, 20, 3, 3, noise=0.5)
    fit = fit_penalized_lqa(des, d.y, ScadParams(5.0))
    assert fit.linear_set == frozenset({0, 1, 2})
    for u in fit.u:
        assert np.all(u == 0.0)
    for j in range(3):
        assert (j in fit.linear_set) == (not np.any(fit.u[j]))


def test_solve_gram_singular_falls_back():
    g = np.array([[1.0, 1.0], [1.0, 1.0]])
    x = solve_gram(g, np.array([2.0, 2.0]))
    assert np.all(np.isfinite(x))
    np.testing.assert_allclose(g @ x, [2.0, 2.0], atol=1e-6)


@pytest.fixture(scope="module")
def dgp_problem():
    d, _ = gen_dgp(DgpConfig(200, 10, 1.0, seed=5), 0)
    return WithinProblem(build_design(d, uniform_specs(4, 3, 12)), d.y)


def test_large_lambda_all_linear(dgp_problem):
    fit = fit_penalized_lqa(dgp_problem, params=ScadParams(float(np.e)))
    assert fit.linear_set == frozenset({0, 1, 2, 3})


def test_tiny_lambda_all_nonlinear(dgp_problem):
    fit = fit_penalized_lqa(dgp_problem, params=ScadParams(float(np.exp(-6))))
    assert fit.linear_set == frozenset()
    assert all(np.any(u) for u in fit.u)


def test_component_evaluation(dgp_problem):
    fit = fit_unpenalized(dgp_problem)
    des = dgp_problem.design
    z = np.array([0.1, 0.6])
    for j in range(4):
        assert fit.component(j, z).shape == (2,)
        np.testing.assert_allclose(fit.component(j, z) - fit.nonlinear_part(j, z), fit.v[j] * (z - 0.5), atol=1e-12)
