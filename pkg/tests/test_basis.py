import math

import numpy as np
import pytest

from trefftz_maxwell.basis import (VACUUM, BasisFunction, DirectionTriple, Material, SlabBasis,
                                   build_element_basis, build_element_basis_3d,
                                   derivative_scale, dimension_2d, dimension_3d, directions_2d,
                                   directions_3d, eval_basis, gram_rank, incoming_mask,
                                   latitude_levels, maxwell_residual)
from trefftz_maxwell.geometry import Domain2D, Element, build_uniform_mesh

EL = Element(0, (0.5, 0.5), (0.5, 0.5))


class Box:
    def __init__(self, center, half_widths):
        self.center = np.asarray(center, dtype=float)
        self.half_widths = np.asarray(half_widths, dtype=float)


def test_material_derived_quantities():
    m = Material(4.0, 1.0)
    assert m.Z == pytest.approx(0.5)
    assert m.c == pytest.approx(0.5)
    with pytest.raises(ValueError):
        Material(0.0, 1.0)


def test_k1_directions():
    dirs = directions_2d(1)
    assert len(dirs) == 5
    angles = [math.degrees(math.atan2(t.d_hat[1], t.d_hat[0])) % 360 for t in dirs]
    np.testing.assert_allclose(angles, [0, 72, 144, 216, 288], atol=1e-12)
    np.testing.assert_allclose(dirs[0].d_hat, [1, 0, 0])
    np.testing.assert_allclose(dirs[0].e_hat, [0, 0, 1])
    np.testing.assert_allclose(dirs[0].h_hat, [0, -1, 0])


def test_rotated_fan():
    dirs = directions_2d(2, math.pi / 4)
    assert len(dirs) == 7
    np.testing.assert_allclose(dirs[0].d_hat[:2], [math.sqrt(0.5)] * 2)


def test_order_zero_directions_rejected():
    with pytest.raises(ValueError):
        directions_2d(0)
    with pytest.raises(ValueError):
        directions_3d(0)


@pytest.mark.parametrize("k,count", [(1, 16), (2, 30), (3, 48)])
def test_3d_triple_count(k, count):
    assert len(directions_3d(k)) == count


def test_latitude_levels_interleave():
    z = latitude_levels(3)
    # sorted ascending: z_1, z_3, z_2, z_0
    order = np.argsort(z)
    assert list(order) == [1, 3, 2, 0]


@pytest.mark.parametrize("p", range(6))
def test_2d_function_count(p):
    assert len(build_element_basis(EL, (0, 0.5), p)) == dimension_2d(p)


def test_p3_count_and_constants():
    b = build_element_basis(EL, (0, 0.5), 3)
    assert len(b) == 24
    assert list(np.bincount(b.orders)) == [3, 5, 7, 9]
    b0 = build_element_basis(EL, (0, 0.5), 0)
    vals = np.array([eval_basis(f, (0.1, 0.2), 0.3) for f in b0.functions])
    np.testing.assert_allclose(vals, np.eye(3))


def test_first_function_vanishes_at_reference_point():
    b = build_element_basis(EL, (0.0, 0.5), 1)
    f = next(f for f in b.functions if f.order == 1)
    assert f.phi(np.array([0.5, 0.5]), 0.0) == 0.0


def test_hand_evaluated_function():
    tri = directions_2d(1)[0]
    f = BasisFunction(1, tri, None, np.zeros(3), 0.0, 1.0, VACUUM, True)
    assert f.phi(np.array([2.0, 0.0]), 1.0) == pytest.approx(1.0)
    np.testing.assert_allclose(eval_basis(f, np.array([2.0, 0.0]), 1.0), [1.0, 0.0, -1.0])


def test_zero_on_characteristic_plane():
    b = build_element_basis(EL, (0.0, 0.5), 3)
    for f in b.functions[3:]:
        r = np.array([0.5, 0.5]) + 0.3 * f.triple.d_hat[:2]
        np.testing.assert_allclose(eval_basis(f, r, 0.3), 0.0, atol=1e-15)


@pytest.mark.parametrize("material", [VACUUM, Material(2.0, 0.5), Material(1.0, 3.0)])
@pytest.mark.parametrize("p", [1, 3, 5])
def test_trefftz_property_2d(material, p, rng):
    b = build_element_basis(EL, (0.0, 0.5), p, material, theta0=0.3)
    for f in b.functions:
        for x in rng.uniform(0.0, 1.0, (20, 3)):
            r = maxwell_residual(f, x[:2], x[2] * 0.5)
            assert np.abs(r).max() <= 1e-12 * derivative_scale(f, x[:2], x[2] * 0.5)


def test_corrupted_triple_has_divergence():
    d = np.array([1.0, 0.0, 0.0])
    e = np.array([0.0, 0.0, 1.0])
    h = np.array([0.6, -0.8, 0.0])  # not orthogonal to d
    f = BasisFunction(2, DirectionTriple(d, e, h), None, np.zeros(3), 0.0, 1.0, VACUUM, False)
    x, t = np.array([0.3, 0.1, 0.0]), 0.2
    psi = f.psi(x, t)
    res = maxwell_residual(f, x, t)
    assert res[-1] == pytest.approx(2 * psi * (h @ d), rel=1e-12)
    assert abs(res[-1]) > 0.1


def test_constants_have_zero_residual():
    b = build_element_basis(EL, (0, 1), 0)
    for f in b.functions:
        assert np.all(maxwell_residual(f, np.zeros(2), 0.0) == 0.0)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_gram_rank_2d(p):
    b = build_element_basis(EL, (0, 0.5), p)
    assert gram_rank(b, EL, (0, 0.5)) == (p + 1) * (p + 3)


def test_gram_rank_3d_p2():
    box = Box(np.full(3, 0.5), np.full(3, 0.5))
    b = build_element_basis_3d(box.center, box.half_widths, (0.0, 1.0), 2)
    assert len(b) == 2 * 3 * 6 + 6 + 10  # 6 constants + 16 + 30 triples
    assert gram_rank(b, box, (0.0, 1.0)) == 52 == dimension_3d(2)


def test_duplicated_function_keeps_rank():
    b = build_element_basis(EL, (0, 0.5), 2)
    dup = type(b)(b.element, b.material, b.functions + (b.functions[5],), b.p)
    assert gram_rank(dup, EL, (0, 0.5)) == gram_rank(b, EL, (0, 0.5))


def test_incoming_mask_left_boundary():
    b = build_element_basis(EL, (0, 0.5), 1)
    mask = incoming_mask(b, np.array([-1.0, 0.0]))
    assert not mask[:3].any()
    dx = np.array([f.triple.d_hat[0] for f in b.functions[3:]])
    np.testing.assert_array_equal(mask[3:], dx > 0)


def test_incoming_mask_direction_equal_normal_is_outgoing():
    b = build_element_basis(EL, (0, 0.5), 1)
    assert not incoming_mask(b, np.array([1.0, 0.0]))[3]


def test_directional_constants_take_part_in_mask():
    b = build_element_basis(EL, (0, 0.5), 0, constants="directional")
    assert len(b) == 3
    mask = incoming_mask(b, np.array([1.0, 0.0]))
    np.testing.assert_array_equal(mask, [False, True, True])
    # the three constant plane waves span the same space as the unit fields
    V = np.array([eval_basis(f, np.zeros(2), 0.0) for f in b.functions])
    assert np.linalg.matrix_rank(V) == 3


def test_unknown_constant_mode():
    with pytest.raises(ValueError, match="constants"):
        build_element_basis(EL, (0, 0.5), 1, constants="mixed")


@pytest.mark.parametrize("constants", ["unit", "directional"])
@pytest.mark.parametrize("p", [0, 2, 4])
def test_slab_basis_matches_scalar_functions(p, constants, rng):
    mesh = build_uniform_mesh(Domain2D(0, 2, 0, 1), 2, 1)
    mats = [VACUUM, Material(2.0, 1.5)]
    theta0 = np.array([0.2, -1.1])
    tau = 0.4
    sb = SlabBasis(mesh, p, tau, mats, theta0, constants)
    assert sb.nb == dimension_2d(p)
    for e in range(2):
        pts = mesh.centers[e] + rng.uniform(-0.5, 0.5, (1, 6, 2))
        s = rng.uniform(0, tau, (1, 6))
        fast = sb.evaluate([e], pts, s)[0]
        eb = sb.element_basis(e, t0=3.0)
        slow = np.stack([[eval_basis(f, pts[0, q], 3.0 + s[0, q]) for f in eb.functions]
                         for q in range(6)])
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-13)
        np.testing.assert_array_equal(sb.incoming([e], np.array([[0.0, -1.0]]))[0],
                                      incoming_mask(eb, np.array([0.0, -1.0])))


def test_slab_basis_field_is_linear_combination(rng):
    mesh = build_uniform_mesh(Domain2D(0, 1, 0, 1), 2, 2)
    sb = SlabBasis(mesh, 2, 0.5)
    c = rng.standard_normal(sb.n_dofs)
    e = np.arange(4)
    pts = mesh.centers[:, None, :] + rng.uniform(-0.25, 0.25, (4, 5, 2))
    F = sb.evaluate(e, pts, 0.1)
    ref = np.einsum("mqbc,mb->mqc", F, c.reshape(4, -1))
    np.testing.assert_allclose(sb.field(c, e, pts, 0.1), ref, rtol=1e-13, atol=1e-14)


def test_slab_basis_rejects_bad_input():
    mesh = build_uniform_mesh(Domain2D(0, 1, 0, 1), 1, 1)
    with pytest.raises(ValueError):
        SlabBasis(mesh, -1, 0.5)
    with pytest.raises(ValueError):
        SlabBasis(mesh, 1, 0.5, materials=[VACUUM, VACUUM])
