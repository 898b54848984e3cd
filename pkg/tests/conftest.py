import numpy as np
import pytest

from pmefront.domain import Domain
from pmefront.fields import DiskGrid, IntervalGrid
from pmefront.oracle import quadratic_pressure_1d


def make_barenblatt_problem(m, nx=201, A0=1.0):
    sol = quadratic_pressure_1d(m, A0)
    R0 = float(sol.R(sol.t0))
    grid = IntervalGrid(Domain.interval(-R0, R0), nx)
    return sol, sol.problem(grid)


@pytest.fixture(scope="session")
def barenblatt_m2():
    return make_barenblatt_problem(2.0, 201)


@pytest.fixture(scope="session")
def unit_interval():
    return Domain.interval(0.0, 1.0)


@pytest.fixture(scope="session")
def disk_domain():
    return Domain.disk((0.0, 0.0), 2.0)


@pytest.fixture(scope="session")
def disk_grid(disk_domain):
    return DiskGrid(disk_domain, 25, 48)


def smooth_random_1d(x, rng, modes=4):
    """Random smooth field: low-mode trigonometric combination."""
    L = x.max() - x.min()
    out = np.zeros_like(x)
    for k in range(1, modes + 1):
        out += (rng.normal() * np.sin(k * np.pi * (x - x.min()) / L)
                + rng.normal() * np.cos(k * np.pi * (x - x.min()) / L))
    return out / modes


def smooth_random_disk(pts, rng, modes=3):
    out = np.zeros(pts.shape[0])
    for k in range(1, modes + 1):
        a, b, c, d = rng.normal(size=4)
        out += (a * np.sin(k * pts[:, 0]) + b * np.cos(k * pts[:, 1])
                + c * np.sin(k * (pts[:, 0] + pts[:, 1])) + d)
    return out / (3 * modes)
