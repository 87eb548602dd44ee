"""Polynomial plane-wave Trefftz bases for Maxwell's equations.

A basis function of order k >= 1 is

    (E, H) = (e, h / Z) * psi**k,   psi = (d . (r - r0) - c (t - t0)) / scale

with (d, e, h) an orthonormal triple, d = e x h.  Such a function solves the
source-free Maxwell system and both divergence constraints exactly.  Order 0
is spanned by constant unit fields, or optionally (TM only) by three
constant plane waves (1, d2 / Z, -d1 / Z) that carry a direction and so take
part in the incoming/outgoing split.

Two settings are supported: the full 3D field (6 components) and the
transverse-magnetic (TM) reduction E = (0, 0, Ez), H = (H1, H2, 0), for which
fields are reported as the 3-vector (Ez, H1, H2).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quadrature import box_rule

INCOMING_TOL = 1e-12
TM_COMPONENTS = (2, 3, 4)  # Ez, H1, H2 inside the 6-vector (E, H)


@dataclass(frozen=True)
class Material:
    epsilon: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not (self.epsilon > 0 and self.mu > 0):
            raise ValueError(f"material parameters must be positive, got {self}")

    @property
    def Z(self) -> float:
        return math.sqrt(self.mu / self.epsilon)

    @property
    def c(self) -> float:
        return 1.0 / math.sqrt(self.epsilon * self.mu)


VACUUM = Material()


@dataclass(frozen=True, eq=False)
class DirectionTriple:
    d_hat: np.ndarray
    e_hat: np.ndarray
    h_hat: np.ndarray

    @classmethod
    def from_direction(cls, d, e):
        """Complete (d, e) with h = d x e, so that d = e x h."""
        d = np.asarray(d, dtype=float)
        e = np.asarray(e, dtype=float)
        return cls(d, e, np.cross(d, e))

    def defect(self) -> float:
        """Largest violation of unit length, orthogonality and d = e x h."""
        d, e, h = self.d_hat, self.e_hat, self.h_hat
        errs = [abs(np.linalg.norm(v) - 1.0) for v in (d, e, h)]
        errs += [abs(d @ e), abs(d @ h), abs(e @ h)]
        errs.append(np.abs(np.cross(e, h) - d).max())
        return float(max(errs))


def directions_2d(k: int, theta0: float = 0.0) -> list[DirectionTriple]:
    """2k+3 equispaced in-plane directions, the first at angle ``theta0``."""
    if k < 1:
        raise ValueError(f"directions are defined for order k >= 1, got {k}")
    m = 2 * k + 3
    e = np.array([0.0, 0.0, 1.0])
    out = []
    for i in range(m):
        a = theta0 + 2.0 * np.pi * i / m
        out.append(DirectionTriple.from_direction([np.cos(a), np.sin(a), 0.0], e))
    return out


def constant_directions_2d(theta0: float = 0.0) -> list[DirectionTriple]:
    """Three equispaced directions for direction-carrying order-0 modes."""
    e = np.array([0.0, 0.0, 1.0])
    return [DirectionTriple.from_direction([np.cos(a), np.sin(a), 0.0], e)
            for a in theta0 + 2.0 * np.pi * np.arange(3) / 3]


CONSTANT_MODES = ("unit", "directional")


def latitude_levels(k: int) -> np.ndarray:
    """Heights z_m, m = 0..k, interleaved around the equator.

    Sorted ascending the levels read ..., z_{k-4}, z_{k-2}, z_k, z_{k-1}, z_{k-3}, ...
    """
    z = np.sort(np.cos(np.pi * (np.arange(k + 1) + 0.5) / (k + 1)))
    same = [m for m in range(k + 1) if (k - m) % 2 == 0]
    other = [m for m in range(k + 1) if (k - m) % 2 == 1]
    order = sorted(same) + sorted(other, reverse=True)
    levels = np.empty(k + 1)
    levels[order] = z
    return levels


def _polarization(d):
    z = np.array([0.0, 0.0, 1.0])
    if np.linalg.norm(np.cross(d, z)) < 1e-8:
        e = np.array([1.0, 0.0, 0.0])
    else:
        e = z
    e = e - (e @ d) * d
    return e / np.linalg.norm(e)


def directions_3d(k: int) -> list[DirectionTriple]:
    """2(k+1)(k+3) triples: (k+1)(k+3) directions on k+1 rings, two polarizations each."""
    if k < 1:
        raise ValueError(f"directions are defined for order k >= 1, got {k}")
    out = []
    for m, z in enumerate(latitude_levels(k)):
        n = 2 * m + 3
        rho = math.sqrt(1.0 - z * z)
        for j in range(n):
            a = 2.0 * np.pi * j / n + np.pi * m / n
            d = np.array([rho * np.cos(a), rho * np.sin(a), z])
            d /= np.linalg.norm(d)
            e1 = _polarization(d)
            e2 = np.cross(d, e1)
            out.append(DirectionTriple.from_direction(d, e1))
            out.append(DirectionTriple.from_direction(d, e2))
    return out


def dimension_2d(p: int) -> int:
    return (p + 1) * (p + 3)


def dimension_3d(p: int) -> int:
    return (p + 1) * (p + 2) * (2 * p + 9) // 3


def local_scale(h: float, c: float, tau: float) -> float:
    """Length normalising the monomial argument on one space-time element."""
    return 0.5 * max(h, c * tau)


@dataclass(frozen=True, eq=False)
class BasisFunction:
    order: int
    triple: DirectionTriple | None
    constant: np.ndarray | None  # 6-vector (E, H) for order 0
    shift: np.ndarray  # spatial reference point, 3-vector
    t0: float
    scale: float
    material: Material = VACUUM
    tm: bool = True

    def psi(self, r, t):
        r = _as3(r)
        d = self.triple.d_hat
        return ((r - self.shift) @ d - self.material.c * (np.asarray(t) - self.t0)) / self.scale

    def phi(self, r, t):
        if self.order == 0:
            return np.ones(np.shape(_as3(r))[:-1])
        return self.psi(r, t) ** self.order

    def fields(self, r, t) -> np.ndarray:
        """Full 6-vector (E, H) at broadcast points ``r`` (..., 2|3) and times ``t``."""
        if self.order == 0:
            shape = np.broadcast_shapes(np.shape(_as3(r))[:-1], np.shape(t))
            return np.broadcast_to(self.constant, shape + (6,)).copy()
        phi = self.phi(r, t)[..., None]
        amp = np.concatenate([self.triple.e_hat, self.triple.h_hat / self.material.Z])
        return phi * amp


def _as3(r):
    r = np.asarray(r, dtype=float)
    if r.shape[-1] == 2:
        r = np.concatenate([r, np.zeros(r.shape[:-1] + (1,))], axis=-1)
    return r


def eval_basis(f: BasisFunction, point, time) -> np.ndarray:
    v = f.fields(point, time)
    return v[..., TM_COMPONENTS] if f.tm else v


def _derivatives(f: BasisFunction, point, time):
    """Exact (dphi/dt, grad phi) of the scaled monomial."""
    if f.order == 0:
        return 0.0, np.zeros(3)
    psi = f.psi(point, time)
    dpsi = f.order * psi ** (f.order - 1) / f.scale
    return -f.material.c * dpsi, f.triple.d_hat * dpsi


def maxwell_residual(f: BasisFunction, point, time) -> np.ndarray:
    """Residual of eps E_t - curl H, mu H_t + curl E, div E, div H at one point.

    Returns 8 entries in 3D mode and the 4 entries
    (eps Ez_t - (curl H)_z, mu H1_t + dEz/dy, mu H2_t - dEz/dx, div H) in TM mode.
    """
    eps, mu = f.material.epsilon, f.material.mu
    if f.order == 0:
        return np.zeros(4 if f.tm else 8)
    dt, grad = _derivatives(f, point, time)
    e = f.triple.e_hat
    h = f.triple.h_hat / f.material.Z
    r_e = eps * dt * e - np.cross(grad, h)
    r_h = mu * dt * h + np.cross(grad, e)
    div_e = grad @ e
    div_h = grad @ h
    if f.tm:
        return np.array([r_e[2], r_h[0], r_h[1], div_h])
    return np.concatenate([r_e, r_h, [div_e, div_h]])


def derivative_scale(f: BasisFunction, point, time) -> float:
    """Magnitude of the individual terms entering ``maxwell_residual``."""
    if f.order == 0:
        return 1.0
    dt, grad = _derivatives(f, point, time)
    m = f.material
    return float(max(abs(dt), np.abs(grad).max()) * max(m.epsilon, m.mu, 1.0 / m.Z, 1.0))


@dataclass(frozen=True, eq=False)
class TrefftzBasis:
    element: int
    material: Material
    functions: tuple[BasisFunction, ...]
    p: int
    tm: bool = True

    def __len__(self):
        return len(self.functions)

    @property
    def orders(self) -> np.ndarray:
        return np.array([f.order for f in self.functions])

    @property
    def directions(self) -> np.ndarray:
        """(nb, 3) propagation directions, zero rows for undirected constants."""
        return np.array([f.triple.d_hat if f.triple is not None else np.zeros(3)
                         for f in self.functions])

    def values(self, points, times) -> np.ndarray:
        """(n, nb, ncomp) field values at n space-time points."""
        cols = [f.fields(points, times) for f in self.functions]
        v = np.stack(cols, axis=-2)
        return v[..., TM_COMPONENTS] if self.tm else v


def _tm_constants():
    out = []
    for comp in TM_COMPONENTS:
        v = np.zeros(6)
        v[comp] = 1.0
        out.append(v)
    return out


def build_element_basis(element, slab, p: int, material: Material = VACUUM,
                        theta0: float = 0.0, constants: str = "unit") -> TrefftzBasis:
    """TM basis of T'_p on ``element`` x ``slab``; (p+1)(p+3) functions."""
    if p < 0:
        raise ValueError(f"order must be non-negative, got {p}")
    if constants not in CONSTANT_MODES:
        raise ValueError(f"constants must be one of {CONSTANT_MODES}, got {constants!r}")
    t0, t1 = slab
    center = _as3(np.asarray(element.center, dtype=float))
    scale = local_scale(element.diameter, material.c, t1 - t0)
    if constants == "unit":
        funcs = [BasisFunction(0, None, v, center, t0, scale, material, True)
                 for v in _tm_constants()]
    else:
        funcs = [BasisFunction(0, tri, np.concatenate([tri.e_hat, tri.h_hat / material.Z]),
                               center, t0, scale, material, True)
                 for tri in constant_directions_2d(theta0)]
    for k in range(1, p + 1):
        for tri in directions_2d(k, theta0):
            funcs.append(BasisFunction(k, tri, None, center, t0, scale, material, True))
    return TrefftzBasis(element.id, material, tuple(funcs), p, True)


def build_element_basis_3d(center, half_widths, slab, p: int,
                           material: Material = VACUUM, element_id: int = 0) -> TrefftzBasis:
    """Full 3D basis of T_p on a box x slab; (p+1)(p+2)(2p+9)/3 functions."""
    t0, t1 = slab
    center = np.asarray(center, dtype=float)
    scale = local_scale(2.0 * float(np.max(half_widths)), material.c, t1 - t0)
    funcs = [BasisFunction(0, None, v, center, t0, scale, material, False) for v in np.eye(6)]
    for k in range(1, p + 1):
        for tri in directions_3d(k):
            funcs.append(BasisFunction(k, tri, None, center, t0, scale, material, False))
    return TrefftzBasis(element_id, material, tuple(funcs), p, False)


def gram_matrix(basis: TrefftzBasis, lower, upper, slab) -> np.ndarray:
    """Space-time L2 Gram matrix over the box [lower, upper] x slab."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rule = box_rule(np.r_[lower, slab[0]], np.r_[upper, slab[1]], 2 * basis.p)
    pts, t = rule.nodes[:, :-1], rule.nodes[:, -1]
    V = basis.values(pts, t)  # (q, nb, ncomp)
    return np.einsum("q,qic,qjc->ij", rule.weights, V, V)


def gram_rank(basis: TrefftzBasis, element, slab, rtol: float = 1e-10) -> int:
    """Numerical rank of the Gram matrix (singular values above rtol * largest).

    ``element`` is anything with ``center`` and ``half_widths``.  The Gram
    matrix is diagonally normalised first, so functions of very different
    magnitude do not hide behind the threshold.
    """
    c = np.asarray(element.center, dtype=float)
    hw = np.asarray(element.half_widths, dtype=float)
    G = gram_matrix(basis, c - hw, c + hw, slab)
    dinv = 1.0 / np.sqrt(np.diag(G))
    s = np.linalg.svd(G * dinv[:, None] * dinv[None, :], compute_uv=False)
    return int(np.sum(s > rtol * s[0]))


def incoming_mask(basis: TrefftzBasis, n) -> np.ndarray:
    """True for plane waves entering through a face with outward normal ``n``."""
    n = _as3(n)
    dn = basis.directions @ n
    directed = np.array([f.triple is not None for f in basis.functions])
    return directed & (dn < -INCOMING_TOL)


def write_directions_csv(path, triples_by_order: dict[int, Sequence[DirectionTriple]]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "index", "dx", "dy", "dz", "ex", "ey", "ez", "hx", "hy", "hz"])
        for k, triples in sorted(triples_by_order.items()):
            for i, tri in enumerate(triples):
                w.writerow([k, i, *(f"{v:.17g}" for v in
                                    np.concatenate([tri.d_hat, tri.e_hat, tri.h_hat]))])


class SlabBasis:
    """TM Trefftz bases of all mesh elements for one time slab.

    Times are slab-local (s = t - t^{n-1} in [0, tau]), so one instance serves
    every slab of a constant-step run.  Element e owns coefficients
    ``e*nb : (e+1)*nb``.
    """

    def __init__(self, mesh, p: int, tau: float, materials=None, theta0=None,
                 constants: str = "unit"):
        if p < 0:
            raise ValueError(f"order must be non-negative, got {p}")
        if constants not in CONSTANT_MODES:
            raise ValueError(f"constants must be one of {CONSTANT_MODES}, got {constants!r}")
        self.constants = constants
        n_el = mesh.n_elements
        self.mesh = mesh
        self.p = p
        self.tau = float(tau)
        if materials is None:
            materials = VACUUM
        if isinstance(materials, Material):
            materials = [materials] * n_el
        if len(materials) != n_el:
            raise ValueError("need one material per element")
        self.materials = tuple(materials)
        self.eps = np.array([m.epsilon for m in materials])
        self.mu = np.array([m.mu for m in materials])
        self.Z = np.sqrt(self.mu / self.eps)
        self.c = 1.0 / np.sqrt(self.eps * self.mu)
        self.theta0 = np.broadcast_to(np.asarray(0.0 if theta0 is None else theta0, dtype=float),
                                      (n_el,)).copy()
        self.centers = mesh.centers
        diam = 2.0 * mesh.half_widths.max(axis=1)
        self.scale = 0.5 * np.maximum(diam, self.c * self.tau)

        orders = [0, 0, 0]
        angles = [self.theta0 + 2.0 * np.pi * i / 3 for i in range(3)]
        for k in range(1, p + 1):
            m = 2 * k + 3
            orders += [k] * m
            angles += [self.theta0 + 2.0 * np.pi * i / m for i in range(m)]
        self.orders = np.array(orders)
        self._groups = {k: slice(int(np.searchsorted(self.orders, k)),
                                 int(np.searchsorted(self.orders, k, side="right")))
                        for k in range(p + 1)}
        nb = len(orders)
        ang = np.stack(angles, axis=1)  # (N, nb)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        self.directed = np.ones(len(orders), dtype=bool)
        if constants == "unit":
            dirs[:, :3] = 0.0
            self.directed[:3] = False
        self.dirs = dirs
        amps = np.empty((n_el, nb, 3))
        amps[:, :, 0] = 1.0
        amps[:, :, 1] = dirs[..., 1] / self.Z[:, None]
        amps[:, :, 2] = -dirs[..., 0] / self.Z[:, None]
        if constants == "unit":
            amps[:, :3] = np.eye(3)
        self.amps = amps

    @property
    def nb(self) -> int:
        return len(self.orders)

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_elements * self.nb

    def scalars(self, elems, points, s) -> np.ndarray:
        """Scalar profiles psi^k (M, Q, nb) for elements (M,), points (M, Q, 2), local times s."""
        elems = np.asarray(elems)
        rel = points - self.centers[elems][:, None, :]
        s = np.broadcast_to(np.asarray(s, dtype=float), rel.shape[:-1])
        psi = rel @ self.dirs[elems].transpose(0, 2, 1)
        psi -= (self.c[elems][:, None] * s)[..., None]
        psi /= self.scale[elems][:, None, None]
        phi = np.ones_like(psi)
        # orders are grouped and ascending; integer powers by repeated products
        for k in range(1, self.p + 1):
            sl = self._groups[k]
            q = psi[..., sl]
            acc = q.copy()
            for _ in range(k - 1):
                acc *= q
            phi[..., sl] = acc
        return phi

    def evaluate(self, elems, points, s) -> np.ndarray:
        """Basis values (M, Q, nb, 3) for elements (M,), points (M, Q, 2), local times s."""
        elems = np.asarray(elems)
        return self.scalars(elems, points, s)[..., None] * self.amps[elems][:, None, :, :]

    def field(self, coeffs, elems, points, s) -> np.ndarray:
        """(M, Q, 3) field of the expansion ``coeffs`` (full global vector)."""
        elems = np.asarray(elems)
        C = np.asarray(coeffs).reshape(self.mesh.n_elements, self.nb)[elems]
        return self.scalars(elems, points, s) @ (C[:, :, None] * self.amps[elems])

    def incoming(self, elems, normals) -> np.ndarray:
        """(M, nb) incoming-mode masks for element/outward-normal pairs."""
        dn = np.einsum("mbx,mx->mb", self.dirs[np.asarray(elems)], normals)
        return self.directed & (dn < -INCOMING_TOL)

    def element_basis(self, e: int, t0: float = 0.0) -> TrefftzBasis:
        el = self.mesh.elements[e]
        return build_element_basis(el, (t0, t0 + self.tau), self.p, self.materials[e],
                                   float(self.theta0[e]), self.constants)
