import warnings

import numpy as np
import pytest

from sievepanel.errors import MaxIterExceeded
from sievepanel.panel_data import PanelDataset
from sievepanel.simulation import COVERAGE_POINTS, DgpConfig, simulate_detection
from sievepanel.spline_basis import build_design, uniform_specs

MC_SEED = 0
MC_REPS = 200


def dense_within(n: int, t: int) -> np.ndarray:
    """``I_N kron H`` built explicitly."""
    h = np.eye(t) - np.ones((t, t)) / t
    return np.kron(np.eye(n), h)


def dense_ls(x: np.ndarray, y: np.ndarray, n: int, t: int) -> np.ndarray:
    """Least squares of ``M_H y`` on ``M_H X`` via lstsq on the dense projector."""
    m = dense_within(n, t)
    coef, *_ = np.linalg.lstsq(m @ x, m @ y, rcond=None)
    return coef


def random_panel(rng, n, t, p, fn=None, noise=1.0):
    z = rng.uniform(size=(n, t, p))
    z[0, 0, :] = 0.0
    z[-1, -1, :] = 1.0
    alpha = rng.normal(size=(n, 1))
    signal = np.zeros((n, t)) if fn is None else fn(z)
    y = signal + alpha + noise * rng.normal(size=(n, t))
    return PanelDataset(y=y, z=z)


def small_design(rng, n, t, p, degree=2, m=3, noise=1.0):
    d = random_panel(rng, n, t, p, fn=lambda z: np.sin(3 * z).sum(axis=2), noise=noise)
    return d, build_design(d, uniform_specs(p, degree, m))


@pytest.fixture(scope="session")
def mc_outcomes():
    """One shared Monte Carlo run on the simulated design (r=1, N=200, T=10)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        cfg = DgpConfig(200, 10, 1.0, seed=MC_SEED, reps=MC_REPS)
        return simulate_detection(cfg, criteria=("cv", "aic", "bic"), points=COVERAGE_POINTS)


@pytest.fixture(autouse=True)
def _quiet_lqa():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        yield
