"""Pointwise boundary densities b(.; .) and r(.) for the supported conditions.

All functions work on broadcast arrays of 3-vectors (last axis).  Quadrature
weighting is left to the caller.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

# g(points (..., 2), t (...)) -> (..., 3) prescribed field
BoundaryData = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PECLike:
    """n x E - beta (n x H) x n = n x g."""
    beta: float = 0.0
    g: Optional[BoundaryData] = None

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")


@dataclass(frozen=True)
class PMCLike:
    """n x H + beta' (n x E) x n = n x g'."""
    beta_prime: float = 0.0
    g_prime: Optional[BoundaryData] = None

    def __post_init__(self):
        if not self.beta_prime >= 0:
            raise ValueError(f"beta_prime must be non-negative, got {self.beta_prime}")


@dataclass(frozen=True)
class SilverMueller:
    """First-order absorbing condition n x E - Z n x (H x n) = 0."""


@dataclass(frozen=True)
class Transparent:
    """Penalises the incoming plane-wave components of the local expansion."""


BoundarySpec = Union[PECLike, PMCLike, SilverMueller, Transparent]


@dataclass(frozen=True, eq=False)
class TraceSample:
    E: np.ndarray
    H: np.ndarray
    E_in: Optional[np.ndarray] = None
    H_in: Optional[np.ndarray] = None


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _normal(n):
    n = np.asarray(n, dtype=float)
    if n.shape[-1] == 2:
        n = np.concatenate([n, np.zeros(n.shape[:-1] + (1,))], axis=-1)
    return n


def _impedance_form(nE, nH, vE, vH, n, Z):
    # shared by Silver-Mueller and the transparent condition
    Z = np.asarray(Z, dtype=float)
    return 0.5 * (_dot(nH, vE) + _dot(nE, np.cross(n, vE)) / Z
                  - _dot(nE, vH) + Z * _dot(nH, np.cross(n, vH)))


def boundary_bilinear_density(spec: BoundarySpec, trial: TraceSample, test: TraceSample,
                              n, Z) -> np.ndarray:
    n = _normal(n)
    if isinstance(spec, Transparent):
        if trial.E_in is None or test.E_in is None or trial.H_in is None or test.H_in is None:
            raise ValueError("transparent condition needs incoming parts of trial and test traces")
        return _impedance_form(np.cross(n, trial.E_in), np.cross(n, trial.H_in),
                               test.E_in, test.H_in, n, Z)
    nE = np.cross(n, trial.E)
    nH = np.cross(n, trial.H)
    if isinstance(spec, PECLike):
        return -_dot(nE, test.H) + spec.beta * _dot(nH, np.cross(n, test.H))
    if isinstance(spec, PMCLike):
        return _dot(nH, test.E) + spec.beta_prime * _dot(nE, np.cross(n, test.E))
    if isinstance(spec, SilverMueller):
        return _impedance_form(nE, nH, test.E, test.H, n, Z)
    raise TypeError(f"unknown boundary spec {spec!r}")


def boundary_linear_density(spec: BoundarySpec, test: TraceSample, n, point, time) -> np.ndarray:
    n = _normal(n)
    if isinstance(spec, PECLike) and spec.g is not None:
        g = np.asarray(spec.g(point, time), dtype=float)
        return -_dot(np.cross(n, g), test.H)
    if isinstance(spec, PMCLike) and spec.g_prime is not None:
        g = np.asarray(spec.g_prime(point, time), dtype=float)
        return _dot(np.cross(n, g), test.E)
    shape = np.broadcast_shapes(np.shape(test.E)[:-1], np.shape(n)[:-1])
    return np.zeros(shape)


def dissipation_density(spec: BoundarySpec, trace: TraceSample, n, Z) -> np.ndarray:
    """b(u; u) + (n x E) . H, non-negative under condition (D)."""
    n = _normal(n)
    return boundary_bilinear_density(spec, trace, trace, n, Z) + _dot(np.cross(n, trace.E), trace.H)


_UNIT = np.eye(6)


def kernel_matrix(spec: BoundarySpec, n, Z) -> np.ndarray:
    """Matrix K (..., 6, 6) with b(trial; test) = trial^T K test for 6-vectors (E, H).

    For the transparent condition the incoming parts are taken equal to the
    full fields; the caller applies the incoming mask to the basis.
    """
    n = _normal(n)[..., None, None, :]
    Z = np.asarray(Z, dtype=float)[..., None, None]
    trial_E, trial_H = _UNIT[:, None, :3], _UNIT[:, None, 3:]
    test_E, test_H = _UNIT[None, :, :3], _UNIT[None, :, 3:]
    trial = TraceSample(trial_E, trial_H, trial_E, trial_H)
    test = TraceSample(test_E, test_H, test_E, test_H)
    return boundary_bilinear_density(spec, trial, test, n, Z)


def pec_data(E, H, n, beta: float) -> np.ndarray:
    """g with n x g = n x E - beta (n x H) x n for given exact fields."""
    n = _normal(n)
    w = np.cross(n, E) - beta * np.cross(np.cross(n, H), n)
    return np.cross(w, n)


def pmc_data(E, H, n, beta_prime: float) -> np.ndarray:
    """g' with n x g' = n x H + beta' (n x E) x n."""
    n = _normal(n)
    w = np.cross(n, H) + beta_prime * np.cross(np.cross(n, E), n)
    return np.cross(w, n)


def tm_to_EH(values) -> tuple[np.ndarray, np.ndarray]:
    """Split TM triples (Ez, H1, H2) into 3-vectors E, H."""
    v = np.asarray(values, dtype=float)
    z = np.zeros(v.shape[:-1])
    E = np.stack([z, z, v[..., 0]], axis=-1)
    H = np.stack([v[..., 1], v[..., 2], z], axis=-1)
    return E, H
