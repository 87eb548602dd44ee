"""Benchmark set-ups: Gaussian plane wave, cylindrical pulse, polynomial wave."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import VACUUM, Material
from .fluxes import PECLike, PMCLike, SilverMueller, Transparent, pec_data, tm_to_EH
from .geometry import BOTTOM, LEFT, RIGHT, SIDES, TOP, Domain2D

OUTFLOW_CHOICES = ("sm", "transparent", "pec-exact", "pec", "pmc")

_NORMALS = {LEFT: (-1.0, 0.0), RIGHT: (1.0, 0.0), BOTTOM: (0.0, -1.0), TOP: (0.0, 1.0)}


class ScenarioError(ValueError):
    pass


def consistent_pec(fields, normal, beta: float) -> PECLike:
    """PEC-like condition whose data g makes the exact ``fields`` satisfy it."""
    n = np.asarray(normal, dtype=float)

    def g(points, t):
        E, H = tm_to_EH(fields(points, t))
        return pec_data(E, H, np.broadcast_to(n, np.shape(points)), beta)
    return PECLike(beta, g)


def simple_spec(name: str, fields=None, normal=None):
    """Boundary spec from its CLI name; exact-data variants need ``fields``."""
    if name == "sm":
        return SilverMueller()
    if name == "transparent":
        return Transparent()
    if name == "pec":
        return PECLike(0.0)
    if name == "pmc":
        return PMCLike(0.0)
    if name == "pec-exact":
        if fields is None:
            raise ScenarioError("pec-exact needs a reference solution")
        return consistent_pec(fields, normal, 0.0)
    raise ScenarioError(f"unknown boundary condition {name!r}; choose from {OUTFLOW_CHOICES}")


# basis direction policies

@dataclass(frozen=True)
class Uniform:
    theta0: float = 0.0


@dataclass(frozen=True)
class Adapted:
    """Rotate each element's directions so one points along ``target``.

    ``target`` is a fixed vector, or None for the radial direction from ``origin``.
    """
    target: Optional[tuple] = None
    origin: tuple = (0.0, 0.0)


def adapt_theta0(center, policy) -> float:
    if isinstance(policy, Uniform):
        return float(policy.theta0)
    if policy.target is not None:
        v = np.asarray(policy.target, dtype=float)
    else:
        v = np.asarray(center, dtype=float) - np.asarray(policy.origin, dtype=float)
    if np.hypot(v[0], v[1]) < 1e-14:
        return 0.0
    return float(math.atan2(v[1], v[0]))


def element_theta0(mesh, policy) -> np.ndarray:
    return np.array([adapt_theta0(c, policy) for c in mesh.centers])


@dataclass(frozen=True)
class PlaneWaveScenario:
    """Gaussian pulse travelling along k across the square, exact data on inflow sides."""
    name = "plane-wave"
    domain: Domain2D = Domain2D(0.0, 10.0, 0.0, 10.0)
    direction: tuple = (-1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0))
    offset: float = 8.0
    width: float = 4.0
    inflow: tuple = (TOP, RIGHT)
    inflow_beta: float = 1.0
    material: Material = VACUUM

    def fields(self, points, t):
        x = np.asarray(points, dtype=float)
        k1, k2 = self.direction
        c, Z = self.material.c, self.material.Z
        E = np.exp(-(k1 * x[..., 0] + k2 * x[..., 1] - c * np.asarray(t) + self.offset) ** 2 / self.width)
        return np.stack([E, k2 * E / Z, -k1 * E / Z], axis=-1)

    def initial(self, points):
        return self.fields(points, 0.0)

    def specs(self, outflow: str = "sm") -> dict:
        out = {}
        for tag in SIDES:
            if tag in self.inflow:
                out[tag] = consistent_pec(self.fields, _NORMALS[tag], self.inflow_beta)
            else:
                out[tag] = simple_spec(outflow, self.fields, _NORMALS[tag])
        return out

    def policy(self, adapted: bool):
        return Adapted(self.direction) if adapted else Uniform()


def plane_wave_fields(points, t):
    return PlaneWaveScenario().fields(points, t)


@dataclass(frozen=True)
class CylindricalScenario:
    """Gaussian bump of Ez at rest; energy watched on the inner square."""
    name = "cylindrical"
    domain: Domain2D = Domain2D(-10.0, 10.0, -10.0, 10.0)
    reference_domain: Domain2D = Domain2D(-30.0, 30.0, -30.0, 30.0)
    width: float = 18.0
    material: Material = VACUUM

    def initial(self, points):
        x = np.asarray(points, dtype=float)
        E = np.exp(-(x[..., 0] ** 2 + x[..., 1] ** 2) / self.width)
        z = np.zeros_like(E)
        return np.stack([E, z, z], axis=-1)

    fields = None

    def specs(self, bc: str = "sm") -> dict:
        if bc == "pec-exact":
            raise ScenarioError("no closed-form solution for the cylindrical pulse")
        return {tag: simple_spec(bc) for tag in SIDES}

    def policy(self, adapted: bool):
        return Adapted(None) if adapted else Uniform()


@dataclass(frozen=True)
class PolynomialWaveScenario:
    """Sum of polynomial plane waves a (d . x - c t + b)^k.

    Each term lies in the local Trefftz space of order >= k, so the scheme
    reproduces it up to rounding when p >= max k.
    """
    name = "polynomial"
    domain: Domain2D = Domain2D(0.0, 2.0, 0.0, 2.0)
    terms: tuple = ((0.3, 2, 1.0, 0.5), (2.1, 1, -0.7, 0.2), (4.0, 2, 0.4, -0.3))
    beta: float = 1.0
    material: Material = VACUUM

    def fields(self, points, t):
        x = np.asarray(points, dtype=float)
        c, Z = self.material.c, self.material.Z
        out = np.zeros(x.shape[:-1] + (3,))
        for angle, k, a, b in self.terms:
            d = (math.cos(angle), math.sin(angle))
            phi = a * (d[0] * x[..., 0] + d[1] * x[..., 1] - c * np.asarray(t) + b) ** k
            out[..., 0] += phi
            out[..., 1] += d[1] * phi / Z
            out[..., 2] += -d[0] * phi / Z
        return out

    def initial(self, points):
        return self.fields(points, 0.0)

    @property
    def degree(self) -> int:
        return max(k for _, k, _, _ in self.terms)

    def specs(self, bc: str = "pec-beta") -> dict:
        if bc == "pec-beta":
            return {tag: consistent_pec(self.fields, _NORMALS[tag], self.beta) for tag in SIDES}
        return {tag: simple_spec(bc, self.fields, _NORMALS[tag]) for tag in SIDES}

    def policy(self, adapted: bool):
        return Uniform()


SCENARIOS = {
    "plane-wave": PlaneWaveScenario,
    "cylindrical": CylindricalScenario,
    "polynomial": PolynomialWaveScenario,
}


def get_scenario(name: str):
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
