from __future__ import annotations

import math

import pytest

from noncollapse_lab.flow import FlowParams, evolve
from noncollapse_lab.models import ShrinkingSphere, ellipse, sample_model

ACCEPTANCE_LINES: list[str] = []

SQRT2 = math.sqrt(2.0)
# semi-axes (2, 1) * sqrt 2: extinction after time 2, so the curve covers [-1, 0];
# the lower vertex starts 0.25 below the origin, inside the conclusion ball
END_TO_END_ELLIPSE = dict(a=2 * SQRT2, b=SQRT2, center=(0.0, SQRT2 - 0.25))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def window_flow(initial, dt=1e-4, store_every=100):
    return evolve(initial, FlowParams(t_start=-1.0, t_end=0.0, dt=dt, store_every=store_every, keep_successor=True))


@pytest.fixture(scope="session")
def sphere_flow():
    """Sphere in R^3 with radius 0.4 at t = 0, 512 profile samples, over [-1, 0]."""
    return window_flow(sample_model(ShrinkingSphere(0.4, 2), -1.0, 512))


@pytest.fixture(scope="session")
def circle_flow():
    """Circle with radius 0.4 at t = 0, 1024 vertices, over [-1, 0]."""
    return window_flow(sample_model(ShrinkingSphere(0.4, 1), -1.0, 1024))


@pytest.fixture(scope="session")
def ellipse_flow():
    e = END_TO_END_ELLIPSE
    return window_flow(ellipse(e["a"], e["b"], 512, center=e["center"], t=-1.0), store_every=50)


@pytest.fixture(scope="session")
def small_sphere_flow():
    """Coarse sphere flow for quick structural tests."""
    return window_flow(sample_model(ShrinkingSphere(0.4, 2), -1.0, 64), dt=1e-3, store_every=50)
