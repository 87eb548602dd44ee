"""Slab matrices A, B and load vector G of the space-time Trefftz DG scheme.

    A c^n = B c^{n-1} + G^n

Rows index test functions, columns trial functions.  Matrices are returned as
scipy BSR matrices with one dense block per (element, element) pair; the
sparsity of A is the mesh adjacency, B is block diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import SlabBasis, TM_COMPONENTS
from .fluxes import (BoundarySpec, Transparent, TraceSample, boundary_linear_density,
                     kernel_matrix, tm_to_EH)
from .quadrature import reference_box_rule

_TM = list(TM_COMPONENTS)
_CHUNK = 1024


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class GlobalDofMap:
    n_elements: int
    block_size: int

    @property
    def total(self) -> int:
        return self.n_elements * self.block_size

    def range(self, e: int) -> range:
        return range(e * self.block_size, (e + 1) * self.block_size)


def default_degree(p: int) -> int:
    return 2 * p + 1


def tm_kernel(spec: BoundarySpec, normals, Z) -> np.ndarray:
    """(..., 3, 3) boundary kernel acting on (Ez, H1, H2)."""
    K = kernel_matrix(spec, normals, Z)
    return K[..., _TM, :][..., :, _TM]


def interface_kernel(normals) -> np.ndarray:
    """(..., 3, 3) kernel of (n x H_trial) . E_test - (n x E_trial) . H_test in TM form."""
    n = np.asarray(normals, dtype=float)
    nx, ny = n[..., 0], n[..., 1]
    K = np.zeros(n.shape[:-1] + (3, 3))
    # n x E = (ny Ez, -nx Ez, 0);  n x H = (0, 0, nx H2 - ny H1)
    K[..., 1, 0] = -ny
    K[..., 2, 0] = nx
    K[..., 0, 1] = -ny
    K[..., 0, 2] = nx
    return K


def _pair_blocks(test_w, trial_k):
    """sum_q sum_c test_w[f,q,i,c] trial_k[f,q,j,c] -> (F, nb, nb)."""
    F, Q, nb, C = test_w.shape
    a = test_w.transpose(0, 2, 1, 3).reshape(F, nb, Q * C)
    b = trial_k.transpose(0, 1, 3, 2).reshape(F, Q * C, trial_k.shape[2])
    return a @ b


def _element_quadrature(basis: SlabBasis, degree: int):
    mesh = basis.mesh
    ref = reference_box_rule(degree, 2)
    hw = mesh.half_widths
    pts = mesh.centers[:, None, :] + hw[:, None, :] * ref.nodes[None, :, :]
    w = ref.weights[None, :] * np.prod(hw, axis=1)[:, None]
    return pts, w


def _face_quadrature(a, b, tau: float, degree: int):
    ref = reference_box_rule(degree, 2)
    u, v = ref.nodes[:, 0], ref.nodes[:, 1]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None, :] + u[None, :, None] * half[:, None, :]
    s = 0.5 * tau * (1.0 + v)
    length = np.linalg.norm(b - a, axis=1)
    w = ref.weights[None, :] * (0.5 * length)[:, None] * (0.5 * tau)
    return pts, s, w


def mass_blocks(basis_test: SlabBasis, s_test: float, basis_trial: SlabBasis, s_trial: float,
                degree: int | None = None) -> np.ndarray:
    """(N, nb, nb) blocks of int_K eps E_j . E_i + mu H_j . H_i at fixed local times."""
    if basis_test.mesh is not basis_trial.mesh and basis_test.mesh.n_elements != basis_trial.mesh.n_elements:
        raise AssemblyError("bases live on different meshes")
    if degree is None:
        degree = default_degree(max(basis_test.p, basis_trial.p))
    pts, w = _element_quadrature(basis_test, degree)
    elems = np.arange(basis_test.mesh.n_elements)
    out = np.empty((len(elems), basis_test.nb, basis_trial.nb))
    for sl in _chunks(len(elems)):
        e = elems[sl]
        Ft = basis_test.evaluate(e, pts[sl], s_test)
        Fj = basis_trial.evaluate(e, pts[sl], s_trial)
        m = np.stack([basis_test.eps[e], basis_test.mu[e], basis_test.mu[e]], axis=-1)
        out[sl] = _pair_blocks(Ft * w[sl][:, :, None, None], Fj * m[:, None, None, :])
    return out


def interior_blocks(basis: SlabBasis, degree: int | None = None):
    """Face blocks (LL, LR, RL, RR); first letter = test side, second = trial side."""
    mesh = basis.mesh
    if degree is None:
        degree = default_degree(basis.p)
    nf = len(mesh.int_left)
    nb = basis.nb
    out = np.empty((4, nf, nb, nb))
    for sl in _chunks(nf):
        pts, s, w = _face_quadrature(mesh.int_a[sl], mesh.int_b[sl], basis.tau, degree)
        FL = basis.evaluate(mesh.int_left[sl], pts, s[None, :])
        FR = basis.evaluate(mesh.int_right[sl], pts, s[None, :])
        K = interface_kernel(mesh.int_normal[sl])[:, None, None]  # (F,1,1,3,3)
        # jump [n x v] = n x (v_L - v_R); average carries 1/2
        KL = 0.5 * (FL[..., None, :] @ K)[..., 0, :]
        KR = -0.5 * (FR[..., None, :] @ K)[..., 0, :]
        wl = FL * w[:, :, None, None]
        wr = FR * w[:, :, None, None]
        out[0, sl] = _pair_blocks(wl, KL)
        out[1, sl] = _pair_blocks(wl, KR)
        out[2, sl] = _pair_blocks(wr, KL)
        out[3, sl] = _pair_blocks(wr, KR)
    return out


def _check_specs(mesh, specs):
    missing = sorted(set(mesh.bdr_tag) - set(specs))
    if missing:
        raise AssemblyError(f"no boundary spec for tag(s) {missing}")


def boundary_blocks(basis: SlabBasis, specs: dict, degree: int | None = None) -> np.ndarray:
    """(Fb, nb, nb) blocks of int_{f x I} b(trial; test) for every boundary face."""
    mesh = basis.mesh
    _check_specs(mesh, specs)
    if degree is None:
        degree = default_degree(basis.p)
    nb = basis.nb
    out = np.zeros((len(mesh.bdr_element), nb, nb))
    for tag in mesh.tags:
        faces = mesh.boundary_faces_with_tag(tag)
        spec = specs[tag]
        for sl in _chunks(len(faces)):
            f = faces[sl]
            el = mesh.bdr_element[f]
            n = mesh.bdr_normal[f]
            pts, s, w = _face_quadrature(mesh.bdr_a[f], mesh.bdr_b[f], basis.tau, degree)
            F = basis.evaluate(el, pts, s[None, :])
            if isinstance(spec, Transparent):
                F = F * basis.incoming(el, n)[:, None, :, None]
            K = tm_kernel(spec, n, basis.Z[el])[:, None, None]
            out[f] = _pair_blocks(F * w[:, :, None, None], (F[..., None, :] @ K)[..., 0, :])
    return out


def _to_bsr(row_el, col_el, blocks, n_el: int, nb: int) -> sp.bsr_matrix:
    row_el = np.asarray(row_el)
    col_el = np.asarray(col_el)
    idx = np.arange(nb)
    rows = np.broadcast_to(row_el[:, None, None] * nb + idx[None, :, None], blocks.shape)
    cols = np.broadcast_to(col_el[:, None, None] * nb + idx[None, None, :], blocks.shape)
    n = n_el * nb
    M = sp.coo_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()
    M.sum_duplicates()
    return M.tobsr(blocksize=(nb, nb))


def assemble_A(mesh, basis: SlabBasis, specs: dict, degree: int | None = None) -> sp.bsr_matrix:
    if basis.mesh is not mesh:
        raise AssemblyError("basis was built for a different mesh")
    n_el, nb = mesh.n_elements, basis.nb
    mass = mass_blocks(basis, 0.0, basis, 0.0, degree)
    face = interior_blocks(basis, degree)
    bdr = boundary_blocks(basis, specs, degree)
    L, R = mesh.int_left, mesh.int_right
    ids = np.arange(n_el)
    rows = np.concatenate([ids, L, L, R, R, mesh.bdr_element])
    cols = np.concatenate([ids, L, R, L, R, mesh.bdr_element])
    blocks = np.concatenate([mass, face[0], face[1], face[2], face[3], bdr])
    return _to_bsr(rows, cols, blocks, n_el, nb)


def assemble_B(mesh, basis: SlabBasis, basis_prev: SlabBasis, degree: int | None = None) -> sp.bsr_matrix:
    """Couples the previous slab's end-time traces to the current start-time traces."""
    if basis.mesh is not mesh or basis_prev.mesh.n_elements != mesh.n_elements:
        raise AssemblyError("bases do not match the mesh")
    blocks = mass_blocks(basis, 0.0, basis_prev, basis_prev.tau, degree)
    ids = np.arange(mesh.n_elements)
    return _to_bsr(ids, ids, blocks, mesh.n_elements, basis.nb)


def assemble_G(mesh, basis: SlabBasis, specs: dict, slab, degree: int | None = None) -> np.ndarray:
    """Boundary load vector sum_f int_{f x I} r(n x g; test)."""
    _check_specs(mesh, specs)
    if degree is None:
        degree = default_degree(basis.p)
    t0 = float(slab[0])
    nb = basis.nb
    G = np.zeros((mesh.n_elements, nb))
    for tag in mesh.tags:
        faces = mesh.boundary_faces_with_tag(tag)
        spec = specs[tag]
        if getattr(spec, "g", None) is None and getattr(spec, "g_prime", None) is None:
            continue
        for sl in _chunks(len(faces)):
            f = faces[sl]
            el = mesh.bdr_element[f]
            n = mesh.bdr_normal[f]
            pts, s, w = _face_quadrature(mesh.bdr_a[f], mesh.bdr_b[f], basis.tau, degree)
            t = np.broadcast_to(t0 + s[None, :], w.shape)
            E, H = tm_to_EH(basis.evaluate(el, pts, s[None, :]))
            dens = boundary_linear_density(spec, TraceSample(E, H), n[:, None, None, :],
                                           pts[:, :, None, :], t[:, :, None])
            np.add.at(G, el, np.einsum("fq,fqi->fi", w, dens))
    return G.ravel()


def diagonal_blocks(M: sp.bsr_matrix) -> np.ndarray:
    """(N, nb, nb) diagonal blocks of a square BSR matrix."""
    M = sp.bsr_matrix(M)
    nb = M.blocksize[0]
    n = M.shape[0] // nb
    out = np.zeros((n, nb, nb))
    for i in range(n):
        for k in range(M.indptr[i], M.indptr[i + 1]):
            if M.indices[k] == i:
                out[i] += M.data[k]
    return out


def write_matrix_coo(path, M):
    """Coordinate text dump, one 'row col value' line per stored entry."""
    C = sp.coo_matrix(M)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


def _chunks(n: int):
    for start in range(0, n, _CHUNK):
        yield slice(start, min(n, start + _CHUNK))
