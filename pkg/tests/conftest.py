import numpy as np
import pytest

from nlsqueeze.fock import DensityMatrix


def random_state(seed: int, n_levels: int = 12, rank: int | None = None) -> DensityMatrix:
    """Random mixed state with populations concentrated on low photon numbers."""
    rng = np.random.default_rng(seed)
    rank = rank or int(rng.integers(1, 4))
    decay = np.exp(-0.35 * np.arange(n_levels))[:, None]
    g = (rng.normal(size=(n_levels, rank)) + 1j * rng.normal(size=(n_levels, rank))) * decay
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
