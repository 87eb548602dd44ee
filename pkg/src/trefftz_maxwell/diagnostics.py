"""Energy bookkeeping, error norms and convergence rates.

The discrete energy is 1/2 int eps|E|^2 + mu|H|^2, the normalisation in which
the per-slab identity

    E(t^n) = E(t^{n-1}) - 1/2 ||[E](t^{n-1})||^2 - 1/2 ||[H](t^{n-1})||^2
             + int_{dOmega x I^n} r - b - (n x E) . H

balances term by term.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .assembly import _element_quadrature, _face_quadrature, default_degree
from .basis import SlabBasis
from .fluxes import (Transparent, TraceSample, boundary_linear_density, dissipation_density,
                     tm_to_EH)
from .quadrature import reference_box_rule

log = logging.getLogger(__name__)

ENERGY_SCHEMA = "# trefftz-maxwell energy v1"
ERROR_SCHEMA = "# trefftz-maxwell errors v1"


@dataclass(frozen=True)
class EnergyRecord:
    slab: int
    t: float
    energy: float
    start_energy: float
    jump_dissipation: float
    boundary_term: float
    identity_residual: float

    @property
    def relative_residual(self) -> float:
        return abs(self.identity_residual) / max(1.0, abs(self.energy))


@dataclass(frozen=True)
class ErrorRecord:
    p: int
    h: float
    tau: float
    error: float
    rate: float | None = None


@dataclass(frozen=True)
class BoundaryReport:
    slab: int
    dissipation: dict = field(default_factory=dict)  # tag -> int b(u;u) + (n x E) . H

    @property
    def negative_tags(self) -> list[str]:
        return [t for t, v in self.dissipation.items() if v < 0.0]


def _weighted_energy(values, w, eps, mu):
    dens = eps[:, None] * values[..., 0] ** 2 + mu[:, None] * (values[..., 1] ** 2 + values[..., 2] ** 2)
    return 0.5 * float(np.sum(w * dens))


def _select(basis: SlabBasis, elements):
    ids = np.arange(basis.mesh.n_elements)
    if elements is None:
        return ids
    elements = np.asarray(elements)
    return ids[elements] if elements.dtype == bool else elements


def discrete_energy(solution, basis: SlabBasis, t: float | None = None,
                    elements=None, degree: int | None = None) -> float:
    """1/2 int eps|E_h|^2 + mu|H_h|^2 at time t (default: slab end)."""
    if t is None:
        t = solution.t_end
    if not solution.t_start - 1e-12 <= t <= solution.t_end + 1e-12:
        raise ValueError(f"t={t} outside slab [{solution.t_start}, {solution.t_end}]")
    pts, w = _element_quadrature(basis, degree or default_degree(basis.p))
    e = _select(basis, elements)
    vals = basis.field(solution.coeffs, e, pts[e], t - solution.t_start)
    return _weighted_energy(vals, w[e], basis.eps[e], basis.mu[e])


def initial_energy(basis: SlabBasis, initial: Callable, elements=None,
                   degree: int | None = None) -> float:
    pts, w = _element_quadrature(basis, degree or default_degree(basis.p))
    e = _select(basis, elements)
    return _weighted_energy(np.asarray(initial(pts[e])), w[e], basis.eps[e], basis.mu[e])


def _trace_parts(basis: SlabBasis, coeffs, el, n, pts, s, transparent: bool):
    F = basis.evaluate(el, pts, s)
    C = np.asarray(coeffs).reshape(basis.mesh.n_elements, basis.nb)[el]
    vals = np.einsum("mqbc,mb->mqc", F, C)
    E, H = tm_to_EH(vals)
    if not transparent:
        return TraceSample(E, H)
    mask = basis.incoming(el, n)
    E_in, H_in = tm_to_EH(np.einsum("mqbc,mb->mqc", F, C * mask))
    return TraceSample(E, H, E_in, H_in)


def boundary_terms(basis: SlabBasis, specs: dict, solution, degree: int | None = None):
    """Per-tag (dissipation, load) integrals over boundary faces x slab.

    dissipation = int b(u; u) + (n x E) . H,   load = int r(n x g; u).
    """
    mesh = basis.mesh
    degree = degree or default_degree(basis.p)
    out = {}
    for tag in mesh.tags:
        spec = specs[tag]
        f = mesh.boundary_faces_with_tag(tag)
        el = mesh.bdr_element[f]
        n = mesh.bdr_normal[f]
        pts, s, w = _face_quadrature(mesh.bdr_a[f], mesh.bdr_b[f], basis.tau, degree)
        tr = _trace_parts(basis, solution.coeffs, el, n, pts, s[None, :],
                          isinstance(spec, Transparent))
        n3 = n[:, None, :]
        diss = dissipation_density(spec, tr, n3, basis.Z[el][:, None])
        t = solution.t_start + np.broadcast_to(s[None, :], w.shape)
        load = boundary_linear_density(spec, tr, n3, pts, t)
        out[tag] = (float(np.sum(w * diss)), float(np.sum(w * load)))
    return out


def energy_identity_residual(basis: SlabBasis, specs: dict, solution, previous,
                             degree: int | None = None) -> EnergyRecord:
    """Evaluate every term of the slab energy identity and return LHS - RHS.

    ``previous`` is the preceding SlabSolution, or for the first slab the
    initial-field callable (points -> (Ez, H1, H2)).
    """
    degree = degree or default_degree(basis.p)
    pts, w = _element_quadrature(basis, degree)
    e = np.arange(basis.mesh.n_elements)
    if callable(previous):
        prev_vals = np.asarray(previous(pts))
    else:
        prev_vals = basis.field(previous.coeffs, e, pts, previous.t_end - previous.t_start)
    start_vals = basis.field(solution.coeffs, e, pts, 0.0)
    end_vals = basis.field(solution.coeffs, e, pts, solution.t_end - solution.t_start)
    start = _weighted_energy(prev_vals, w, basis.eps, basis.mu)
    jump = _weighted_energy(start_vals - prev_vals, w, basis.eps, basis.mu)
    end = _weighted_energy(end_vals, w, basis.eps, basis.mu)
    bt = boundary_terms(basis, specs, solution, degree)
    boundary = sum(load - diss for diss, load in bt.values())
    return EnergyRecord(solution.index, solution.t_end, end, start, jump, boundary,
                        end - (start - jump + boundary))


def transparency_monitor(basis: SlabBasis, specs: dict, solution,
                         degree: int | None = None) -> BoundaryReport:
    bt = boundary_terms(basis, specs, solution, degree)
    report = BoundaryReport(solution.index, {t: d for t, (d, _) in bt.items()})
    for tag in report.negative_tags:
        log.info("slab %d: boundary '%s' feeds energy in (%.3e)", solution.index, tag,
                 report.dissipation[tag])
    return report


def slab_error_terms(basis: SlabBasis, solution, reference: Callable,
                     degree: int | None = None, component: int | None = 0):
    """(int |u_ref - u_h|^2, int |u_ref|^2) over the mesh x slab.

    ``component`` selects Ez (0), H1, H2; None uses all three.
    """
    degree = degree or (2 * basis.p + 5)
    ref = reference_box_rule(degree, 3)
    mesh = basis.mesh
    hw = mesh.half_widths
    tau = solution.t_end - solution.t_start
    xy = ref.nodes[:, :2]
    s = 0.5 * tau * (1.0 + ref.nodes[:, 2])
    pts = mesh.centers[:, None, :] + hw[:, None, :] * xy[None, :, :]
    w = ref.weights[None, :] * np.prod(hw, axis=1)[:, None] * 0.5 * tau
    e = np.arange(mesh.n_elements)
    uh = basis.field(solution.coeffs, e, pts, s[None, :])
    u = np.asarray(reference(pts, solution.t_start + s[None, :]))
    if component is not None:
        uh, u = uh[..., component:component + 1], u[..., component:component + 1]
    return float(np.sum(w * np.sum((u - uh) ** 2, axis=-1))), float(np.sum(w * np.sum(u ** 2, axis=-1)))


def l2_spacetime_error(solutions: Sequence, basis: SlabBasis, reference: Callable,
                       degree: int | None = None, component: int | None = 0) -> float:
    """Relative L2(Omega x (0, T)) error of one field component."""
    num = den = 0.0
    for sol in solutions:
        a, b = slab_error_terms(basis, sol, reference, degree, component)
        num += a
        den += b
    if den == 0.0:
        return float(np.sqrt(num))
    return float(np.sqrt(num / den))


def convergence_rate(samples: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    if len(samples) < 2:
        raise ValueError("need at least two (h, error) samples")
    h = np.array([s[0] for s in samples], dtype=float)
    err = np.array([s[1] for s in samples], dtype=float)
    if np.any(np.diff(h) >= 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    if np.any(err <= 0):
        raise ValueError("errors must be positive")
    slope = np.polyfit(np.log(h), np.log(err), 1)[0]
    return float(slope)


def write_energy_csv(path, records: Sequence[EnergyRecord], region_energy=None):
    with open(path, "w", newline="") as fh:
        fh.write(ENERGY_SCHEMA + "\n")
        w = csv.writer(fh)
        head = ["slab", "t", "energy", "boundary_dissipation", "jump_dissipation", "identity_residual"]
        if region_energy is not None:
            head.append("region_energy")
        w.writerow(head)
        for i, r in enumerate(records):
            row = [r.slab, repr(float(r.t)), repr(r.energy), repr(-r.boundary_term),
                   repr(r.jump_dissipation), repr(r.identity_residual)]
            if region_energy is not None:
                row.append(repr(float(region_energy[i])))
            w.writerow(row)


def write_error_csv(path, records: Sequence[ErrorRecord]):
    with open(path, "w", newline="") as fh:
        fh.write(ERROR_SCHEMA + "\n")
        w = csv.writer(fh)
        w.writerow(["p", "h", "tau", "error", "rate"])
        for r in records:
            w.writerow([r.p, repr(float(r.h)), repr(float(r.tau)), repr(float(r.error)),
                        "" if r.rate is None else repr(float(r.rate))])
