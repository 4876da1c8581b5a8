import numpy as np
import pytest

from shearlab3d.generators import FeasibilityProfile, filter_generator
from shearlab3d.geometry import LatticeConstants
from shearlab3d.transform import ShearletSystem


@pytest.fixture(scope="session")
def gen():
    return filter_generator(15, 10, 24)


@pytest.fixture(scope="session")
def profile():
    return FeasibilityProfile()


@pytest.fixture(scope="session")
def c_default():
    return LatticeConstants(0.25, 0.125)


@pytest.fixture(scope="session")
def sys32(gen, c_default):
    return ShearletSystem(gen, 2, c_default, n=32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_volume(n, seed=0):
    """Random band-limited test volume supported away from the boundary."""
    r = np.random.default_rng(seed)
    x = (np.arange(n) + 0.5) / n
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    f = np.zeros((n, n, n))
    for _ in range(4):
        q = r.integers(-3, 4, 3)
        f += r.standard_normal() * np.cos(2 * np.pi * (q[0] * X + q[1] * Y + q[2] * Z) + r.uniform(0, 6))
    return f * np.exp(-((X - .5) ** 2 + (Y - .5) ** 2 + (Z - .5) ** 2) / 0.02)


# ---------------------------------------------------------------------------
# shared n=64 ball experiment (expensive; built once per session)


@pytest.fixture(scope="session")
def sys64(gen, c_default):
    return ShearletSystem(gen, 2, c_default, n=64)


@pytest.fixture(scope="session")
def ball64():
    from shearlab3d.phantoms import ball_phantom
    return ball_phantom(n=64)


@pytest.fixture(scope="session")
def ball64_coef(sys64, ball64):
    return sys64.analyze(ball64.data)


@pytest.fixture(scope="session")
def ball64_curves(sys64, ball64, ball64_coef):
    from shearlab3d import approximation as ap
    Ns = ap.default_Ns()
    return {"shearlet": ap.error_curve(ball64, sys64, Ns, "ball", coefficients=ball64_coef),
            "wavelet": ap.wavelet_baseline(ball64, Ns, phantom_id="ball"),
            "fourier": ap.fourier_baseline(ball64, Ns, phantom_id="ball")}


# ---------------------------------------------------------------------------
# acceptance report: one line per criterion, printed after the run

ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
