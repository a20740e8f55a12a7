"""Randomized invariants checked with hypothesis."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from sievepanel.estimator import fit_penalized_lqa, fit_unpenalized
from sievepanel.inference import RestrictedBasis, build_V_NT, riesz_representer
from sievepanel.panel_data import PanelDataset, within_demean
from sievepanel.penalty import ScadParams, scad_deriv, scad_value
from sievepanel.spline_basis import BasisSpec, build_design, eval_basis, integrate, uniform_specs

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**31 - 1)


@SETTINGS
@given(
    lam=st.floats(1e-3, 10.0),
    kappa=st.floats(2.1, 10.0),
    z=st.lists(st.floats(0.0, 50.0), min_size=2, max_size=20),
)
def test_scad_monotone_bounded(lam, kappa, z):
    params = ScadParams(lam, kappa)
    z = np.sort(np.asarray(z))
    vals = scad_value(z, params)
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.all(vals <= 0.5 * (kappa + 1) * lam**2 + 1e-12)
    assert np.all(vals <= lam * z + 1e-12)
    d = scad_deriv(z, params)
    assert np.all((d >= 0) & (d <= lam))


@SETTINGS
@given(degree=st.integers(1, 4), inner=st.lists(st.floats(0.02, 0.98), min_size=0, max_size=6, unique=True))
def test_orthogonality_on_random_knots(degree, inner):
    inner = sorted(inner)
    if inner and np.min(np.diff([0.0, *inner, 1.0])) < 0.01:
        return
    spec = BasisSpec(degree, np.array([0.0, *inner, 1.0]))
    means = integrate(lambda s: eval_basis(spec, s), knots=spec.knots)
    cross = integrate(lambda s: eval_basis(spec, s)[:, 1:] * (s[:, None] - 0.5), knots=spec.knots)
    assert np.max(np.abs(means)) < 1e-8
    assert np.max(np.abs(cross), initial=0.0) < 1e-8


@SETTINGS
@given(seed=seeds, n=st.integers(2, 8), t=st.integers(2, 6))
def test_within_demean_projection(seed, n, t):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, t))
    w = within_demean(x)
    np.testing.assert_allclose(within_demean(w), w, atol=1e-12)
    np.testing.assert_allclose(within_demean(x + rng.normal(size=(n, 1))), w, atol=1e-12)


def _panel(seed, n=25, t=4, p=2):
    rng = np.random.default_rng(seed)
    z = rng.uniform(size=(n, t, p))
    y = np.sin(4 * z).sum(axis=2) + rng.normal(size=(n, 1)) + 0.3 * rng.normal(size=(n, t))
    return rng, PanelDataset(y=y, z=z)


@SETTINGS
@given(seed=seeds, lam=st.floats(0.0, 1.0))
def test_fit_ignores_fixed_effects(seed, lam):
    rng, d = _panel(seed)
    des = build_design(d, uniform_specs(2, 2, 3))
    shifted = d.y + rng.normal(scale=10.0, size=(d.n_individuals, 1))
    a = fit_penalized_lqa(des, d.y, ScadParams(lam))
    b = fit_penalized_lqa(des, shifted, ScadParams(lam))
    assert a.linear_set == b.linear_set
    np.testing.assert_allclose(a.coef(), b.coef(), atol=1e-6)


@SETTINGS
@given(seed=seeds)
def test_relabeling_individuals(seed):
    rng, d = _panel(seed)
    perm = rng.permutation(d.n_individuals)
    des = build_design(d, uniform_specs(2, 3, 3))
    d2 = PanelDataset(y=d.y[perm], z=d.z[perm])
    des2 = build_design(d2, uniform_specs(2, 3, 3))
    np.testing.assert_allclose(fit_unpenalized(des, d.y).coef(), fit_unpenalized(des2, d2.y).coef(), atol=1e-8)


@SETTINGS
@given(seed=seeds, lin=st.sets(st.integers(0, 2), max_size=3), z0=st.floats(0.0, 1.0))
def test_riesz_reproduces_random_functionals(seed, lin, z0):
    rng, d = _panel(seed, n=30, t=4, p=3)
    rb = RestrictedBasis.build(build_design(d, uniform_specs(3, 3, 4)), lin)
    v = build_V_NT(rb)
    theta = rng.normal(size=rb.dim)
    for j in range(3):
        for point in (None, z0):
            c, a = riesz_representer(rb, v, j, point)
            assert abs((rb.xd @ a) @ (rb.xd @ theta) / rb.nt - c @ theta) < 1e-8
