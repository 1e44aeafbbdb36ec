import numpy as np
import pytest

from polyvem.mesh import PolyMesh, from_cells


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def polygon_mesh(coords) -> PolyMesh:
    """Single-cell mesh from a counterclockwise vertex list."""
    coords = np.asarray(coords, dtype=float)
    return from_cells(coords, [list(range(len(coords)))], lambda x, y: "gamma")


def random_convex_polygon(rng, k: int) -> np.ndarray:
    # keep vertices apart so the polygon is not degenerate
    angles = np.linspace(0.0, 2 * np.pi, k, endpoint=False) + rng.uniform(-0.25, 0.25, k) * (2 * np.pi / k)
    radii = rng.uniform(0.7, 1.3, k)
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1) + rng.normal(size=2)


def random_star_polygon(rng, k: int) -> np.ndarray:
    """Possibly non-convex polygon that stays star-shaped around its vertex mean."""
    angles = np.linspace(0.0, 2 * np.pi, k, endpoint=False)
    radii = np.where(np.arange(k) % 2 == 0, 1.0, rng.uniform(0.6, 1.0, k))
    pts = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    return pts - pts.mean(axis=0) + rng.normal(size=2)


UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
