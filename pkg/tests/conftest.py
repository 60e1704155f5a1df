import numpy as np
import pytest

from bubbletower import ModelParams, PotentialSpec, energy_constants


@pytest.fixture(scope="session")
def c4():
    return energy_constants(3, 4.0)


@pytest.fixture(scope="session")
def c7():
    return energy_constants(3, 7.0)


@pytest.fixture(scope="session")
def v_minus_one():
    return PotentialSpec.constant(-1.0)


def make_params(q=4.0, eps=1e-2, k=1, v=-1.0, n_dim=3):
    return ModelParams.make(n_dim, q, eps, k=k, potential=PotentialSpec.constant(v))


def probe_functions(grid, frame, count, seed):
    """Deterministic random bumps near the spikes, unit star norm."""
    from bubbletower import GridFunction, star_norm

    rng = np.random.default_rng(seed)
    x = grid.x
    out = []
    for _ in range(count):
        vals = np.zeros(grid.n)
        for xi in frame.xi:
            n_bumps = rng.integers(1, 4)
            for _ in range(n_bumps):
                amp = rng.normal()
                width = rng.uniform(0.5, 2.0)
                center = xi + rng.uniform(-3.0, 3.0)
                vals += amp / np.cosh(width * (x - center))
        gf = GridFunction(grid, vals)
        norm = star_norm(gf, frame)
        out.append(GridFunction(grid, vals / norm))
    return out
