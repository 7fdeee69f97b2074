import numpy as np
import pytest

from beliefnet import PanelDataset


def random_network(p, rng, density=0.6, scale=0.35):
    """Random symmetric zero-diagonal omega with (I - omega) kept PD."""
    w = np.zeros((p, p))
    iu = np.triu_indices(p, 1)
    mask = rng.random(len(iu[0])) < density
    w[iu] = rng.uniform(-scale, scale, len(iu[0])) * mask
    w += w.T
    while True:
        try:
            np.linalg.cholesky(np.eye(p) - w)
            return w
        except np.linalg.LinAlgError:
            w *= 0.9


def make_panel(values, roles=None, **kwargs):
    """PanelDataset from an (n_persons, n_times, n_beliefs) array."""
    values = np.asarray(values, dtype=float)
    n, t, p = values.shape
    beliefs = tuple(f"b{i}" for i in range(p))
    if roles is None:
        roles = {b: ("moral" if i < (p + 1) // 2 else "social") for i, b in enumerate(beliefs)}
    defaults = dict(
        persons=tuple(f"p{i:03d}" for i in range(n)),
        time_points=tuple(f"w{j}" for j in range(t)),
        beliefs=beliefs,
        roles=roles,
        values=values,
        scale="belief",
    )
    defaults.update(kwargs)
    return PanelDataset(**defaults)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
