import pytest

from ifred.mesh import build_line_mesh, build_mapped_mesh, circle_radius, extract_interface


@pytest.fixture(scope="session")
def line4():
    mesh = build_line_mesh(4)
    return mesh, extract_interface(mesh)


@pytest.fixture(scope="session")
def octagon():
    mesh = build_mapped_mesh(circle_radius(0.5), 8, 2, 2)
    return mesh, extract_interface(mesh)


@pytest.fixture(scope="session")
def coarse_circle():
    mesh = build_mapped_mesh(circle_radius(0.5), 32, 4, 4, beta_minus=1.0, beta_plus=5.0)
    return mesh, extract_interface(mesh)
