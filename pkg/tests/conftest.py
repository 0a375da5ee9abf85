import numpy as np
import pytest

from ghostsim import Geometry, ObjectSpec, PlaneGrid, propagator_from_matrix

WAVELENGTH = 500e-9
PITCH = 10e-6


def symmetric_geometry(n_src: int, n_img: int, lz_over_pitch2: float, *, src_pitch=PITCH, img_pitch=PITCH):
    """Equal-arm layout with lambda*z expressed in units of pitch^2."""
    z = lz_over_pitch2 * src_pitch * img_pitch / WAVELENGTH
    return Geometry.symmetric(PlaneGrid(n_src, src_pitch), PlaneGrid(n_img, img_pitch), WAVELENGTH, z)


def double_slit_px(grid: PlaneGrid, width_px: float, sep_px: float) -> ObjectSpec:
    from ghostsim.objects import double_slit

    return double_slit(grid, width_px * grid.pitch, sep_px * grid.pitch)


def random_instance(rng, n_s, n_x, n_y):
    src, gx, gy = PlaneGrid(n_s, 1.0), PlaneGrid(n_x, 1.0), PlaneGrid(n_y, 1.0)

    def cmat(r, c):
        return rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c))

    t = rng.random(n_x) * np.exp(2j * np.pi * rng.random(n_x))
    return propagator_from_matrix(cmat(n_x, n_s), src, gx), propagator_from_matrix(cmat(n_y, n_s), src, gy), \
        ObjectSpec(gx, t)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
