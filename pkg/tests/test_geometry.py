import numpy as np
import pytest

from trefftz_maxwell.geometry import (BOTTOM, LEFT, RIGHT, SIDES, TOP, Domain2D, MeshError,
                                      build_uniform_mesh, mesh_with_size)


def test_plane_wave_mesh_has_100_unit_elements():
    mesh = build_uniform_mesh(Domain2D(0, 10, 0, 10), 10, 10)
    assert mesh.n_elements == 100
    np.testing.assert_allclose(mesh.half_widths, 0.5)
    assert mesh.h == 1.0


def test_single_element():
    mesh = build_uniform_mesh(Domain2D(0, 1, 0, 1), 1, 1)
    assert mesh.n_elements == 1
    assert len(mesh.interior_faces) == 0
    assert len(mesh.boundary_faces) == 4
    assert sorted(mesh.bdr_tag) == sorted(SIDES)


def test_two_elements_share_one_face():
    mesh = build_uniform_mesh(Domain2D(0, 2, 0, 1), 2, 1)
    assert len(mesh.interior_faces) == 1
    f = mesh.interior_faces[0]
    assert abs(f.normal[0]) == 1.0 and f.normal[1] == 0.0
    assert (f.left, f.right) == (0, 1)
    np.testing.assert_allclose(f.segment, [(1, 0), (1, 1)])


@pytest.mark.parametrize("nx,ny", [(0, 3), (3, -1), (2.5, 2)])
def test_bad_counts_rejected(nx, ny):
    with pytest.raises(MeshError, match="positive integers"):
        build_uniform_mesh(Domain2D(0, 1, 0, 1), nx, ny)


@pytest.mark.parametrize("bounds", [(1, 1, 0, 1), (0, 1, 2, 1), (0, np.inf, 0, 1)])
def test_degenerate_domain_rejected(bounds):
    with pytest.raises(MeshError):
        Domain2D(*bounds)


@pytest.mark.parametrize("nx,ny", [(1, 1), (3, 2), (5, 7)])
def test_face_counts_and_normals(nx, ny):
    mesh = build_uniform_mesh(Domain2D(-1, 2, 0, 3), nx, ny)
    assert len(mesh.int_left) == (nx - 1) * ny + nx * (ny - 1)
    assert len(mesh.bdr_element) == 2 * (nx + ny)
    # interior normals point from the lower id to the higher id
    d = mesh.centers[mesh.int_right] - mesh.centers[mesh.int_left]
    assert np.all(np.sum(d * mesh.int_normal, axis=1) > 0)
    assert np.all(mesh.int_left < mesh.int_right)
    # outward boundary normals
    out = {LEFT: (-1, 0), RIGHT: (1, 0), BOTTOM: (0, -1), TOP: (0, 1)}
    for f, tag in enumerate(mesh.bdr_tag):
        np.testing.assert_array_equal(mesh.bdr_normal[f], out[tag])
        mid = 0.5 * (mesh.bdr_a[f] + mesh.bdr_b[f])
        assert np.dot(mid - mesh.centers[mesh.bdr_element[f]], mesh.bdr_normal[f]) > 0


def test_boundary_length_matches_perimeter():
    dom = Domain2D(0, 3, 0, 2)
    mesh = build_uniform_mesh(dom, 6, 4)
    length = np.linalg.norm(mesh.bdr_b - mesh.bdr_a, axis=1).sum()
    assert length == pytest.approx(10.0)
    assert np.sum(4 * np.prod(mesh.half_widths, axis=1)) == pytest.approx(dom.area)


def test_element_numbering_is_row_major():
    mesh = build_uniform_mesh(Domain2D(0, 3, 0, 2), 3, 2)
    assert mesh.element_id(2, 1) == 5
    np.testing.assert_allclose(mesh.centers[5], [2.5, 1.5])


def test_mesh_with_size():
    mesh = mesh_with_size(Domain2D(-10, 10, -10, 10), 0.5)
    assert (mesh.nx, mesh.ny) == (40, 40)
    with pytest.raises(MeshError, match="does not divide"):
        mesh_with_size(Domain2D(0, 1, 0, 1), 0.3)


def test_elements_inside():
    mesh = mesh_with_size(Domain2D(-3, 3, -3, 3), 1.0)
    inner = mesh.elements_inside(Domain2D(-1, 1, -1, 1))
    assert inner.sum() == 4
