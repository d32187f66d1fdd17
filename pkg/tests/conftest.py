import numpy as np
import pytest

from simspectra import TriMesh, make_cylinder, make_icosphere, make_strip


@pytest.fixture(scope="session")
def tri_mesh():
    return TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


@pytest.fixture(scope="session")
def strip_mesh():
    return make_strip(12, 7)


@pytest.fixture(scope="session")
def cylinder_mesh():
    return make_cylinder(10, 10)


@pytest.fixture(scope="session")
def icosphere2():
    return make_icosphere(2)


def rigid_copy(mesh, seed=0):
    """Rotated + translated copy of a mesh (same connectivity)."""
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(4)
    w, x, y, z = q / np.linalg.norm(q)
    rot = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    t = rng.uniform(-2, 2, 3)
    return TriMesh(mesh.vertices @ rot.T + t, mesh.faces)
