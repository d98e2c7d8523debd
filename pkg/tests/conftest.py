import numpy as np
import pytest

from fodgmm.instruments import InstrumentScheme
from fodgmm.panel import PanelData
from fodgmm.simulation import DesignPoint, generate_panel, replication_seed


def make_panel(T=6, N=200, seed=0, **kw):
    design = DesignPoint(N=N, T=T, **kw)
    return generate_panel(design, replication_seed(seed, 0))


def noiseless_panel(T=6, N=200, seed=0, eta=True):
    """Panel with v = 0 and i.i.d. regressors, so the model holds exactly.

    Without ``eta`` the outcome is an exact linear function of its own lag
    and x, which makes any instrument set containing two adjacent y lags and
    the matching x collinear; use ``X_LAGS`` then.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((N, T + 1))
    effect = rng.standard_normal(N) if eta else np.zeros(N)
    y = np.empty((N, T + 1))
    y[:, 0] = rng.standard_normal(N)
    for t in range(1, T + 1):
        y[:, t] = 0.5 * y[:, t - 1] + 0.5 * x[:, t] + effect
    return PanelData(y, x, truth=(0.5, 0.5))


# lags of x only: valid for any panel, full rank for i.i.d. regressors
X_LAGS = InstrumentScheme("x-lags", lambda p, t: p.x[:, : t + 1, 0])


@pytest.fixture(scope="session")
def panel6():
    return make_panel(T=6)


@pytest.fixture(scope="session")
def panel10():
    return make_panel(T=10)
