"""Shared rods and the acceptance summary hook."""

import numpy as np
import pytest

from plsrod.actuation import CableLayout
from plsrod.rod import STRAIGHT, Material, Partition, RadiusProfile, Rod

LENGTHS = (0.09, 0.07, 0.04)
COARSE = (9, 7, 4)  # 1 cm segments: fast, still well inside the asymptotic range

ACCEPTANCE_LINES = []


def make_rod(segments=None, viscosity=0.0, lengths=LENGTHS, sampling="left", quad_points=4, base_pose=None):
    profile = RadiusProfile(1e-2, 5e-3, sum(lengths))
    material = Material(1.1e5, 3.793e4, 2000.0, viscosity)
    pose = np.eye(4) if base_pose is None else base_pose
    return Rod(profile, material, Partition.from_lengths(lengths, segments), pose, quad_points, sampling)


def random_state(rng, n_nodes, curvature=30.0, linear=0.05):
    """Node strains with ``|K| <= curvature`` and small shear/stretch."""
    out = []
    for _ in range(n_nodes):
        k = rng.normal(size=3)
        k *= rng.uniform(0, curvature) / np.linalg.norm(k)
        out.append(np.concatenate([k, STRAIGHT[3:] + rng.uniform(-linear, linear, 3)]))
    return np.concatenate(out)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def coarse_rod():
    return make_rod(COARSE)


@pytest.fixture(scope="session")
def viscous_rod():
    return make_rod(COARSE, viscosity=1e4)


@pytest.fixture(scope="session")
def fine_rod():
    return make_rod()


@pytest.fixture(scope="session")
def layout(coarse_rod):
    return CableLayout.on_surface(coarse_rod.profile)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
