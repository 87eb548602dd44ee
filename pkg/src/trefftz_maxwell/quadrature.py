"""Gauss-Legendre rules and their tensor products on boxes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_POINTS = 32


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray   # (n, dim)
    weights: np.ndarray  # (n,)

    def __len__(self):
        return len(self.weights)

    def integrate(self, f):
        return np.dot(self.weights, f(self.nodes))


def points_for_degree(degree: int) -> int:
    """Points per axis so that a Gauss rule is exact for ``degree``."""
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    return max(1, math.ceil((degree + 1) / 2))


@lru_cache(maxsize=None)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1]."""
    if int(n) != n or not 1 <= n <= MAX_POINTS:
        raise ValueError(f"point count must be in 1..{MAX_POINTS}, got {n}")
    x, w = _leggauss(int(n))
    return QuadratureRule(x[:, None].copy(), w.copy())


@lru_cache(maxsize=None)
def _reference_box(n: int, dim: int):
    x, w = _leggauss(n)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def reference_box_rule(degree: int, dim: int) -> QuadratureRule:
    """Tensor Gauss rule on [-1, 1]^dim, exact per axis up to ``degree``."""
    nodes, weights = _reference_box(points_for_degree(degree), dim)
    return QuadratureRule(nodes, weights)


def box_rule(lower, upper, degree: int) -> QuadratureRule:
    """Tensor rule on the axis-aligned box [lower, upper]."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    ref = reference_box_rule(degree, lower.size)
    half = 0.5 * (upper - lower)
    mid = 0.5 * (upper + lower)
    return QuadratureRule(mid + half * ref.nodes, ref.weights * np.prod(half))


def element_rule(element, degree: int) -> QuadratureRule:
    c = np.asarray(element.center, dtype=float)
    hw = np.asarray(element.half_widths, dtype=float)
    return box_rule(c - hw, c + hw, degree)


def face_time_rule(segment, slab, degree: int) -> QuadratureRule:
    """Rule on segment x [t0, t1]; nodes are (x, y, t)."""
    a, b = (np.asarray(p, dtype=float) for p in segment)
    t0, t1 = slab
    ref = reference_box_rule(degree, 2)
    u, v = ref.nodes[:, 0], ref.nodes[:, 1]
    xy = 0.5 * (a + b) + 0.5 * u[:, None] * (b - a)
    t = 0.5 * (t0 + t1) + 0.5 * v * (t1 - t0)
    length = float(np.linalg.norm(b - a))
    w = ref.weights * 0.25 * length * (t1 - t0)
    return QuadratureRule(np.column_stack([xy, t]), w)


def volume_time_rule(element, slab, degree: int) -> QuadratureRule:
    """Rule on element x [t0, t1]; nodes are (x, y, t)."""
    c = np.asarray(element.center, dtype=float)
    hw = np.asarray(element.half_widths, dtype=float)
    t0, t1 = slab
    return box_rule(np.r_[c - hw, t0], np.r_[c + hw, t1], degree)
