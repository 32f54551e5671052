import numpy as np
import pytest

from elastospec import primal_oracle
from elastospec.lab import solve_case
from elastospec.spectrum import richardson_reference


@pytest.fixture(scope="session")
def square_reference():
    return richardson_reference("square", lam=1.0, levels=(32, 64, 128))


@pytest.fixture(scope="session")
def lshape_reference():
    return richardson_reference("lshape", lam=1.0, levels=(32, 64, 128))


@pytest.fixture(scope="session")
def square_oracle_n64():
    return primal_oracle("square", 64, lam=1.0, mu=1.0, n_eigs=8)


@pytest.fixture(scope="session")
def right4_case():
    return solve_case("square", "right", 4, 1.0)


def random_triangle(rng, min_area=0.05):
    """A CCW triangle with bounded aspect, as a one-cell mesh."""
    from elastospec.mesh import TriMesh, build_topology, cross2

    while True:
        pts = rng.uniform(-1.0, 1.0, size=(3, 2))
        area = 0.5 * cross2(pts[1] - pts[0], pts[2] - pts[0])
        if area < 0:
            pts = pts[[0, 2, 1]]
            area = -area
        if area > min_area:
            break
    m = TriMesh(vertices=pts, cells=np.array([[0, 1, 2]]), family="right",
                domain="square", n_per_side=1)
    return build_topology(m)
