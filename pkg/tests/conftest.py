import numpy as np
import pytest

from swflow.diffgeo import GaugePhase
from swflow.grid import (
    bump_function,
    connection,
    dealias,
    make_grid,
    random_band_limited,
    scalar,
    spectral_partial,
)


def random_pair(grid, seed=0, kmax=2, amp_phi=0.5, amp_a=0.5, spinor_rank=1):
    """Random band-limited (A, phi) with independent seeds."""
    phi = random_band_limited(grid, 0, spinor_rank, kmax, seed=seed, amplitude=amp_phi)
    A = random_band_limited(grid, 1, 1, kmax, seed=seed + 1000, amplitude=amp_a,
                            kind="imaginary", form_degree=1)
    return A, phi


def random_phase(grid, seed=0, kmax=1, amplitude=0.4):
    return GaugePhase(random_band_limited(grid, 0, 1, kmax, seed=seed, amplitude=amplitude,
                                          kind="real"))


def antisymmetric(f):
    """Antisymmetrise the last two tensor indices of a rank-2 field."""
    return f.like(f.data - np.swapaxes(f.data, 0, 1))


def concentrated_connection(grid, center):
    """Connection whose curvature is a mean-free band-projected bump at ``center``."""
    f = dealias(bump_function(grid, center, 0.1, 0.5))
    f = f.like(5 * (f.data - f.data.mean()))
    hat = np.fft.fftn(f.data[0], axes=(-2, -1))
    ksq = grid.k_squared
    inv = np.where(ksq > 0, -1.0 / np.where(ksq > 0, ksq, 1.0), 0.0)
    u = scalar(grid, np.fft.ifftn(hat * inv, axes=(-2, -1)).real)
    ux = spectral_partial(u, 0).data[0].real
    uy = spectral_partial(u, 1).data[0].real
    return connection(grid, -uy, ux)


@pytest.fixture
def grid16():
    return make_grid(2, (16, 16))


@pytest.fixture
def grid32():
    return make_grid(2, (32, 32))



ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
