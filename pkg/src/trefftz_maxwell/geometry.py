"""Structured rectangular meshes of a 2D domain.

Elements are numbered row by row (x index fastest).  Interior faces carry the
unit normal pointing from the lower element id to the higher one, which fixes
the sign convention of the jump terms in the assembly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

LEFT, RIGHT, BOTTOM, TOP = "left", "right", "bottom", "top"
SIDES = (LEFT, RIGHT, BOTTOM, TOP)


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Domain2D:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(np.isfinite(v) for v in vals):
            raise MeshError(f"domain bounds must be finite, got {vals}")
        if not self.x_min < self.x_max:
            raise MeshError(f"degenerate domain: x_min={self.x_min} >= x_max={self.x_max}")
        if not self.y_min < self.y_max:
            raise MeshError(f"degenerate domain: y_min={self.y_min} >= y_max={self.y_max}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, points, tol=1e-12):
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return ((x >= self.x_min - tol) & (x <= self.x_max + tol)
                & (y >= self.y_min - tol) & (y <= self.y_max + tol))


@dataclass(frozen=True)
class Element:
    id: int
    center: tuple[float, float]
    half_widths: tuple[float, float]

    @property
    def area(self) -> float:
        return 4.0 * self.half_widths[0] * self.half_widths[1]

    @property
    def diameter(self) -> float:
        """Largest side length, used as the local mesh size h_K."""
        return 2.0 * max(self.half_widths)


@dataclass(frozen=True)
class InteriorFace:
    segment: tuple[tuple[float, float], tuple[float, float]]
    left: int
    right: int
    normal: tuple[float, float]


@dataclass(frozen=True)
class BoundaryFace:
    segment: tuple[tuple[float, float], tuple[float, float]]
    element: int
    normal: tuple[float, float]
    tag: str


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform nx-by-ny rectangular mesh.

    The per-entity views (``elements``, ``interior_faces``, ``boundary_faces``)
    are convenient for inspection; the solver works on the array attributes
    (``centers``, ``int_left``, ``bdr_normal``, ...) directly.
    """

    domain: Domain2D
    nx: int
    ny: int
    centers: np.ndarray = field(repr=False)
    half_widths: np.ndarray = field(repr=False)
    int_a: np.ndarray = field(repr=False)
    int_b: np.ndarray = field(repr=False)
    int_left: np.ndarray = field(repr=False)
    int_right: np.ndarray = field(repr=False)
    int_normal: np.ndarray = field(repr=False)
    bdr_a: np.ndarray = field(repr=False)
    bdr_b: np.ndarray = field(repr=False)
    bdr_element: np.ndarray = field(repr=False)
    bdr_normal: np.ndarray = field(repr=False)
    bdr_tag: tuple[str, ...] = field(repr=False)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def h(self) -> float:
        return float(2.0 * self.half_widths.max())

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.bdr_tag)))

    def element_id(self, i: int, j: int) -> int:
        return j * self.nx + i

    @cached_property
    def elements(self) -> list[Element]:
        return [Element(e, tuple(self.centers[e]), tuple(self.half_widths[e]))
                for e in range(self.n_elements)]

    @cached_property
    def interior_faces(self) -> list[InteriorFace]:
        return [InteriorFace((tuple(self.int_a[f]), tuple(self.int_b[f])),
                             int(self.int_left[f]), int(self.int_right[f]),
                             tuple(self.int_normal[f]))
                for f in range(len(self.int_left))]

    @cached_property
    def boundary_faces(self) -> list[BoundaryFace]:
        return [BoundaryFace((tuple(self.bdr_a[f]), tuple(self.bdr_b[f])),
                             int(self.bdr_element[f]), tuple(self.bdr_normal[f]),
                             self.bdr_tag[f])
                for f in range(len(self.bdr_element))]

    def boundary_faces_with_tag(self, tag: str) -> np.ndarray:
        return np.array([f for f, t in enumerate(self.bdr_tag) if t == tag], dtype=int)

    def elements_inside(self, domain: Domain2D) -> np.ndarray:
        """Boolean mask of elements whose center lies in ``domain``."""
        return domain.contains(self.centers, tol=0.0)


def build_uniform_mesh(domain: Domain2D, nx: int, ny: int) -> Mesh:
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"element counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(domain.x_min, domain.x_max, nx + 1)
    ys = np.linspace(domain.y_min, domain.y_max, ny + 1)
    hx = np.diff(xs) / 2.0
    hy = np.diff(ys) / 2.0

    xc = 0.5 * (xs[:-1] + xs[1:])
    yc = 0.5 * (ys[:-1] + ys[1:])
    X, Y = np.meshgrid(xc, yc)  # (ny, nx), x fastest after ravel
    centers = np.stack([X.ravel(), Y.ravel()], axis=1)
    HX, HY = np.meshgrid(hx, hy)
    half_widths = np.stack([HX.ravel(), HY.ravel()], axis=1)

    eid = np.arange(nx * ny).reshape(ny, nx)

    # vertical interior faces between (i, j) and (i+1, j)
    jv, iv = np.meshgrid(np.arange(ny), np.arange(1, nx), indexing="ij")
    v_a = np.stack([xs[iv].ravel(), ys[jv].ravel()], axis=1)
    v_b = np.stack([xs[iv].ravel(), ys[jv + 1].ravel()], axis=1)
    v_left = eid[jv, iv - 1].ravel()
    v_right = eid[jv, iv].ravel()
    v_n = np.tile([1.0, 0.0], (v_left.size, 1))

    # horizontal interior faces between (i, j) and (i, j+1)
    jh, ih = np.meshgrid(np.arange(1, ny), np.arange(nx), indexing="ij")
    h_a = np.stack([xs[ih].ravel(), ys[jh].ravel()], axis=1)
    h_b = np.stack([xs[ih + 1].ravel(), ys[jh].ravel()], axis=1)
    h_left = eid[jh - 1, ih].ravel()
    h_right = eid[jh, ih].ravel()
    h_n = np.tile([0.0, 1.0], (h_left.size, 1))

    int_a = np.concatenate([v_a, h_a]).reshape(-1, 2)
    int_b = np.concatenate([v_b, h_b]).reshape(-1, 2)
    int_left = np.concatenate([v_left, h_left]).astype(int)
    int_right = np.concatenate([v_right, h_right]).astype(int)
    int_normal = np.concatenate([v_n, h_n]).reshape(-1, 2)

    bdr_a, bdr_b, bdr_el, bdr_n, bdr_tag = [], [], [], [], []

    def add(a, b, e, n, tag):
        bdr_a.append(a)
        bdr_b.append(b)
        bdr_el.append(e)
        bdr_n.append(n)
        bdr_tag.append(tag)

    for j in range(ny):
        add((xs[0], ys[j]), (xs[0], ys[j + 1]), eid[j, 0], (-1.0, 0.0), LEFT)
    for j in range(ny):
        add((xs[-1], ys[j]), (xs[-1], ys[j + 1]), eid[j, -1], (1.0, 0.0), RIGHT)
    for i in range(nx):
        add((xs[i], ys[0]), (xs[i + 1], ys[0]), eid[0, i], (0.0, -1.0), BOTTOM)
    for i in range(nx):
        add((xs[i], ys[-1]), (xs[i + 1], ys[-1]), eid[-1, i], (0.0, 1.0), TOP)

    return Mesh(
        domain=domain, nx=nx, ny=ny,
        centers=centers, half_widths=half_widths,
        int_a=int_a, int_b=int_b, int_left=int_left, int_right=int_right,
        int_normal=int_normal,
        bdr_a=np.array(bdr_a, dtype=float), bdr_b=np.array(bdr_b, dtype=float),
        bdr_element=np.array(bdr_el, dtype=int), bdr_normal=np.array(bdr_n, dtype=float),
        bdr_tag=tuple(bdr_tag),
    )


def mesh_with_size(domain: Domain2D, h: float) -> Mesh:
    """Uniform mesh whose element side is ``h`` (domain sides must be multiples of h)."""
    nx = (domain.x_max - domain.x_min) / h
    ny = (domain.y_max - domain.y_min) / h
    if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
        raise MeshError(f"mesh size h={h} does not divide the domain {domain}")
    return build_uniform_mesh(domain, int(round(nx)), int(round(ny)))
