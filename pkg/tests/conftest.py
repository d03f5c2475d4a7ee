import numpy as np
import pytest

from mhd3s import spectral as sp
from mhd3s.state import State


def random_hat(grid: sp.Grid, rng: np.random.Generator, ncomp: int = 1, decay: float = 0.5, kmax=None) -> np.ndarray:
    """Smooth random real field in spectral form, shape (ncomp, *spectral_shape)."""
    shape = (ncomp,) + grid.spectral_shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    k = np.sqrt(np.broadcast_to(grid.k2, grid.spectral_shape))
    env = np.exp(-decay * k)
    if kmax is not None:
        env = env * (k <= kmax)
    return sp.enforce_hermitian(grid, c * env)


def random_state(grid: sp.Grid, rng: np.random.Generator, decay: float = 0.5, kmax=None, amp: float = 1.0) -> State:
    hat = amp * random_hat(grid, rng, 7, decay, kmax)
    hat[4:] = sp.leray(grid, hat[4:])
    return State(grid, hat)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid16():
    return sp.Grid.cube(16)


# Acceptance criteria append (number, title, passed, detail) here; the lines
# are repeated in the terminal summary so they survive output capture.
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}  {detail}")
