import numpy as np
import pytest

from app.models import PointCloud
from app.schemas import TaskConfig
from app.synth import gen_cylinder, gen_plane


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def plane_scene():
    """21 x 21 grid, 5 mm spacing, analytic +z normals."""
    return gen_plane(21, 21, 0.005)


@pytest.fixture
def cylinder_scene():
    return gen_cylinder(0.05, 0.05, 0.005)


@pytest.fixture
def random_cloud(rng) -> PointCloud:
    return PointCloud(points=rng.uniform(0.0, 1.0, size=(500, 3)))


@pytest.fixture
def small_config() -> TaskConfig:
    """Radii sized for the 5 mm fixture grids."""
    return TaskConfig(r_classify=0.02, r_edge=0.011, normal_radius=0.011, min_neighbors=5, c=1.0)
