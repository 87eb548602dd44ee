import numpy as np
import pytest
import scipy.sparse as sp

from trefftz_maxwell.assembly import (AssemblyError, GlobalDofMap, assemble_A, assemble_B,
                                      assemble_G, boundary_blocks, diagonal_blocks,
                                      interior_blocks, mass_blocks, write_matrix_coo)
from trefftz_maxwell.basis import Material, SlabBasis, eval_basis
from trefftz_maxwell.fluxes import PECLike, PMCLike, SilverMueller, Transparent
from trefftz_maxwell.geometry import SIDES, Domain2D, build_uniform_mesh, mesh_with_size
from trefftz_maxwell.quadrature import box_rule
from trefftz_maxwell.scenarios import PlaneWaveScenario, PolynomialWaveScenario
from trefftz_maxwell.stepper import project_initial


def all_sides(spec):
    return {t: spec for t in SIDES}


def test_dof_map():
    m = GlobalDofMap(4, 15)
    assert m.total == 60
    ranges = [set(m.range(e)) for e in range(4)]
    assert set().union(*ranges) == set(range(60))
    assert sum(len(r) for r in ranges) == 60


def test_single_element_p0_is_identity(unit_square):
    b = SlabBasis(unit_square, 0, 0.5)
    A = assemble_A(unit_square, b, all_sides(PECLike(0.0)))
    np.testing.assert_allclose(A.toarray(), np.eye(3), atol=1e-15)


def test_two_element_interface_term():
    mesh = build_uniform_mesh(Domain2D(0, 2, 0, 1), 2, 1)
    tau = 0.7
    b = SlabBasis(mesh, 0, tau)
    LL = interior_blocks(b)[0, 0]
    # trial H = (0, 1, 0), test E = (0, 0, 1), n = (1, 0, 0): (n x h) . e = 1, average carries 1/2
    assert LL[0, 2] == pytest.approx(0.5 * tau * 1.0)
    # trial E = e_z, test H = (1, 0, 0): -(n x e) . h = -(0, -1, 0) . (1, 0, 0) = 0
    assert LL[1, 0] == pytest.approx(0.0)
    assert LL[2, 0] == pytest.approx(0.5 * tau)


def test_small_slab_kills_face_terms():
    mesh = build_uniform_mesh(Domain2D(0, 2, 0, 2), 2, 2)
    specs = all_sides(SilverMueller())
    big = SlabBasis(mesh, 2, 0.5)
    tiny = SlabBasis(mesh, 2, 1e-9)
    np.testing.assert_allclose(mass_blocks(tiny, 0.0, tiny, 0.0), mass_blocks(big, 0.0, big, 0.0))
    assert np.abs(interior_blocks(tiny)).max() < 1e-8
    assert np.abs(boundary_blocks(tiny, specs)).max() < 1e-8


def test_missing_spec():
    mesh = build_uniform_mesh(Domain2D(0, 1, 0, 1), 1, 1)
    b = SlabBasis(mesh, 1, 0.5)
    with pytest.raises(AssemblyError, match="no boundary spec"):
        assemble_A(mesh, b, {"left": SilverMueller()})


def test_basis_mesh_mismatch():
    m1 = build_uniform_mesh(Domain2D(0, 1, 0, 1), 1, 1)
    m2 = build_uniform_mesh(Domain2D(0, 1, 0, 1), 1, 1)
    with pytest.raises(AssemblyError):
        assemble_A(m2, SlabBasis(m1, 1, 0.5), all_sides(SilverMueller()))


def test_sparsity_is_mesh_adjacency():
    mesh = build_uniform_mesh(Domain2D(0, 3, 0, 2), 3, 2)
    b = SlabBasis(mesh, 1, 0.5)
    A = assemble_A(mesh, b, all_sides(SilverMueller()))
    nb = b.nb
    pattern = np.zeros((6, 6), dtype=bool)
    dense = A.toarray()
    for i in range(6):
        for j in range(6):
            pattern[i, j] = np.any(dense[i * nb:(i + 1) * nb, j * nb:(j + 1) * nb] != 0)
    adj = np.eye(6, dtype=bool)
    adj[mesh.int_left, mesh.int_right] = True
    adj[mesh.int_right, mesh.int_left] = True
    np.testing.assert_array_equal(pattern, adj)
    assert A.blocksize == (nb, nb)


def test_b_is_block_diagonal_and_matches_p0_mass():
    mesh = build_uniform_mesh(Domain2D(0, 2, 0, 2), 2, 2)
    b = SlabBasis(mesh, 0, 0.5)
    B = assemble_B(mesh, b, b)
    np.testing.assert_allclose(B.toarray(), np.eye(12), atol=1e-15)
    assert not np.any(B @ np.zeros(12))


def test_b_is_slab_independent():
    # B from slab-local coordinates equals the directly integrated couplings of slabs 1 and 2
    mesh = build_uniform_mesh(Domain2D(0, 1, 0, 1), 1, 1)
    tau = 0.4
    b = SlabBasis(mesh, 2, tau, theta0=0.3)
    B = assemble_B(mesh, b, b).toarray()
    rule = box_rule([0, 0], [1, 1], 6)
    for n in (1, 2):
        cur = b.element_basis(0, t0=n * tau)
        prev = b.element_basis(0, t0=(n - 1) * tau)
        Vc = np.stack([[eval_basis(f, x, n * tau) for f in cur.functions] for x in rule.nodes])
        Vp = np.stack([[eval_basis(f, x, n * tau) for f in prev.functions] for x in rule.nodes])
        direct = np.einsum("q,qic,qjc->ij", rule.weights, Vc, Vp)
        np.testing.assert_allclose(B, direct, rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("spec", [PECLike(0.0), PECLike(1.0), PMCLike(0.5), SilverMueller()])
@pytest.mark.parametrize("tau", [0.05, 0.5, 4.0])
def test_symmetric_part_positive_definite(spec, tau, rng):
    mesh = build_uniform_mesh(Domain2D(0, 2, 0, 2), 2, 2)
    b = SlabBasis(mesh, 2, tau)
    A = assemble_A(mesh, b, all_sides(spec)).toarray()
    S = 0.5 * (A + A.T)
    for _ in range(100):
        x = rng.standard_normal(A.shape[0])
        assert x @ S @ x > 0


def test_g_vanishes_without_data(small_mesh):
    b = SlabBasis(small_mesh, 2, 0.5)
    for spec in (Transparent(), SilverMueller(), PECLike(1.0),
                 PECLike(1.0, lambda x, t: np.zeros(x.shape[:-1] + (3,)))):
        G = assemble_G(small_mesh, b, all_sides(spec), (0.0, 0.5))
        assert G.shape == (b.n_dofs,)
        assert not np.any(G)


def test_g_support_on_inflow_sides():
    sc = PlaneWaveScenario()
    mesh = mesh_with_size(sc.domain, 1.0)
    b = SlabBasis(mesh, 2, 0.5)
    G = assemble_G(mesh, b, sc.specs("sm"), (4.0, 4.5)).reshape(mesh.n_elements, -1)
    touched = np.zeros(mesh.n_elements, dtype=bool)
    for f, tag in enumerate(mesh.bdr_tag):
        if tag in ("top", "right"):
            touched[mesh.bdr_element[f]] = True
    active = np.any(G != 0, axis=1)
    assert active.any()
    assert not np.any(active & ~touched)


@pytest.mark.parametrize("constants", ["unit", "directional"])
def test_exact_solution_satisfies_scheme(constants):
    # coefficients of an exact Trefftz polynomial solution satisfy A c^n = B c^{n-1} + G^n
    sc = PolynomialWaveScenario()
    mesh = mesh_with_size(sc.domain, 1.0)
    tau = 0.3
    b = SlabBasis(mesh, 3, tau, materials=Material(), theta0=0.4, constants=constants)
    specs = sc.specs()
    A = assemble_A(mesh, b, specs)
    B = assemble_B(mesh, b, b)
    rule = box_rule([-0.5, -0.5, 0.0], [0.5, 0.5, tau], 8)

    def fit(n):
        coeffs = []
        for e in range(mesh.n_elements):
            pts = mesh.centers[e] + rule.nodes[None, :, :2]
            s = rule.nodes[None, :, 2]
            F = b.evaluate([e], pts, s)[0]  # (Q, nb, 3)
            u = sc.fields(pts[0], (n - 1) * tau + s[0])
            M = F.transpose(0, 2, 1).reshape(-1, b.nb)
            c, *_ = np.linalg.lstsq(M, u.ravel(), rcond=None)
            coeffs.append(c)
        return np.concatenate(coeffs)

    c1, c2 = fit(1), fit(2)
    rhs1 = project_initial(b, sc.initial) + assemble_G(mesh, b, specs, (0.0, tau))
    rhs2 = B @ c1 + assemble_G(mesh, b, specs, (tau, 2 * tau))
    for c, rhs in ((c1, rhs1), (c2, rhs2)):
        assert np.linalg.norm(A @ c - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_diagonal_blocks():
    M = sp.bsr_matrix(np.arange(36.0).reshape(6, 6), blocksize=(3, 3))
    D = diagonal_blocks(M)
    np.testing.assert_array_equal(D[0], np.arange(36.0).reshape(6, 6)[:3, :3])
    np.testing.assert_array_equal(D[1], np.arange(36.0).reshape(6, 6)[3:, 3:])


def test_write_matrix_coo(tmp_path):
    M = sp.csr_matrix(np.array([[0.0, 1.5], [-2.0, 1 / 3]]))
    write_matrix_coo(tmp_path / "m.txt", M)
    rows = [line.split() for line in (tmp_path / "m.txt").read_text().splitlines()]
    assert [(int(r), int(c)) for r, c, _ in rows] == [(0, 1), (1, 0), (1, 1)]
    assert float(rows[2][2]) == 1 / 3
