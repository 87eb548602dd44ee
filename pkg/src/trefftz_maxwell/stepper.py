"""Slab-by-slab time stepping: A c^n = B c^{n-1} + G^n.

A and B depend only on the mesh, the basis and tau, so both are assembled and
A is factorised once per run; G is rebuilt on every slab from boundary data.
"""
from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import diagnostics as dg
from .assembly import (_element_quadrature, assemble_A, assemble_B, assemble_G, default_degree,
                       diagonal_blocks)
from .basis import SlabBasis

log = logging.getLogger(__name__)

DIRECT_LIMIT = 20000
RESIDUAL_RTOL = 1e-11
RESIDUAL_ATOL = 1e-13


class SolverError(RuntimeError):
    pass


@dataclass
class SlabSolution:
    index: int
    t_start: float
    t_end: float
    coeffs: np.ndarray


def project_initial(basis: SlabBasis, initial: Callable, degree: int | None = None) -> np.ndarray:
    """Right-hand side of the first slab: int_K eps E0 . e_i(0) + mu H0 . h_i(0)."""
    pts, w = _element_quadrature(basis, degree or default_degree(basis.p))
    U = np.asarray(initial(pts), dtype=float)
    if U.shape != pts.shape[:-1] + (3,):
        raise ValueError(f"initial field must return (..., 3) values, got {U.shape}")
    m = np.stack([basis.eps, basis.mu, basis.mu], axis=-1)[:, None, :]
    F = basis.evaluate(np.arange(basis.mesh.n_elements), pts, 0.0)
    return np.einsum("mq,mqc,mqbc->mb", w, m * U, F).ravel()


class SolverHandle:
    """Factorised slab matrix; ``solve`` enforces the residual bound."""

    def __init__(self, A, method: str = "auto", threshold: int = DIRECT_LIMIT,
                 rtol: float = RESIDUAL_RTOL, restart: int = 60, maxiter: int = 50):
        if method not in ("auto", "direct", "iterative"):
            raise ValueError(f"unknown solver method {method!r}")
        if method == "auto":
            method = "direct" if A.shape[0] <= threshold else "iterative"
        self.A = sp.csr_matrix(A)
        self.method = method
        self.rtol = rtol
        self.restart = restart
        self.maxiter = maxiter
        self.iterations: list[int] = []
        if method == "direct":
            try:
                self._lu = spla.splu(self.A.tocsc())
            except RuntimeError as exc:
                raise SolverError(f"factorisation failed: {exc}") from exc
        else:
            D = diagonal_blocks(sp.bsr_matrix(A))
            try:
                self._dinv = np.linalg.inv(D)
            except np.linalg.LinAlgError as exc:
                raise SolverError("singular diagonal block in preconditioner") from exc
            self._D = D
            self._nb = D.shape[1]

    def _precond(self, y):
        return (self._dinv @ y.reshape(-1, self._nb, 1)).ravel()

    def _gmres(self, rhs, x0):
        n = rhs.shape[0]
        op = spla.LinearOperator((n, n), matvec=lambda y: self.A @ self._precond(y), dtype=float)
        y0 = None if x0 is None else (self._D @ x0.reshape(-1, self._nb, 1)).ravel()
        count = [0]

        def cb(_):
            count[0] += 1
        # right preconditioning: the GMRES residual is the true residual of A x = rhs
        y, info = spla.gmres(op, rhs, x0=y0, rtol=0.1 * self.rtol, atol=0.0,
                             restart=self.restart, maxiter=self.maxiter,
                             callback=cb, callback_type="pr_norm")
        self.iterations.append(count[0])
        if info < 0:
            raise SolverError(f"GMRES breakdown (info={info})")
        return self._precond(y)

    def solve(self, rhs, x0=None) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        bnorm = np.linalg.norm(rhs)
        if bnorm == 0.0:
            return np.zeros_like(rhs)
        if self.method == "direct":
            x = self._lu.solve(rhs)
            r = rhs - self.A @ x
            if np.linalg.norm(r) > self.rtol * bnorm:
                x = x + self._lu.solve(r)  # one refinement sweep
        else:
            x = self._gmres(rhs, x0)
        res = np.linalg.norm(rhs - self.A @ x)
        if not np.isfinite(res) or (res > self.rtol * bnorm and res > RESIDUAL_ATOL):
            raise SolverError(f"linear residual {res:.3e} exceeds bound "
                              f"({self.rtol:g} x {bnorm:.3e})")
        self.last_residual = res / bnorm
        return x


def factorize(A, method: str = "auto", threshold: int = DIRECT_LIMIT,
              rtol: float = RESIDUAL_RTOL) -> SolverHandle:
    return SolverHandle(A, method, threshold, rtol)


def step(handle: SolverHandle, B, G, c_prev) -> np.ndarray:
    """One slab update c^n = A^{-1} (B c^{n-1} + G^n)."""
    rhs = B @ c_prev
    if G is not None:
        rhs = rhs + G
    return handle.solve(rhs, x0=c_prev)


@dataclass
class ResidualEntry:
    slab: int
    residual: float
    iterations: int


@dataclass
class RunResult:
    basis: SlabBasis
    solutions: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    region_energy: Optional[list] = None
    initial_energy: float = 0.0
    error: Optional[float] = None
    solver_method: str = ""
    timings: dict = field(default_factory=dict)

    @property
    def final(self) -> Optional[SlabSolution]:
        return self.solutions[-1] if self.solutions else None

    @property
    def max_identity_residual(self) -> float:
        return max((r.relative_residual for r in self.energy), default=0.0)


def slab_count(T: float, tau: float) -> int:
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if T < 0:
        raise ValueError(f"T must be non-negative, got {T}")
    m = int(round(T / tau))
    if abs(m * tau - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of tau={tau}")
    return m


def run(mesh, p: int, specs: dict, initial: Callable, T: float, tau: float, *,
        materials=None, theta0=None, constants: str = "unit", solver: str = "auto",
        degree: int | None = None, reference: Callable | None = None, energy_region=None, monitor: bool = True,
        callback: Callable | None = None, keep: bool = True) -> RunResult:
    """March the scheme over m = T / tau slabs from the initial field.

    ``initial(points) -> (..., 3)`` gives (Ez, H1, H2) at t = 0.  With
    ``reference(points, t)`` the relative L2 space-time error of Ez is
    accumulated; ``energy_region`` (element ids or mask) records the energy
    of a subset of elements at every slab end.  ``callback(n, solution,
    energy_record, basis)`` is called after every slab.
    """
    m = slab_count(T, tau)
    clock = _time.perf_counter
    t0 = clock()
    basis = SlabBasis(mesh, p, tau, materials, theta0, constants)
    res = RunResult(basis)
    res.initial_energy = dg.initial_energy(basis, initial, degree=degree)
    if energy_region is not None:
        res.region_energy = [dg.initial_energy(basis, initial, energy_region, degree)]
    if m == 0:
        return res
    A = assemble_A(mesh, basis, specs, degree)
    B = assemble_B(mesh, basis, basis, degree)
    res.timings["assemble"] = clock() - t0
    t1 = clock()
    handle = factorize(A, solver)
    res.solver_method = handle.method
    res.timings["factorize"] = clock() - t1
    has_data = any(getattr(s, "g", None) is not None or getattr(s, "g_prime", None) is not None
                   for s in specs.values())
    err_num = err_den = 0.0
    prev = None
    t1 = clock()
    for n in range(1, m + 1):
        ts = (n - 1) * tau
        G = assemble_G(mesh, basis, specs, (ts, ts + tau), degree) if has_data else None
        if prev is None:
            rhs = project_initial(basis, initial, degree)
            if G is not None:
                rhs = rhs + G
            c = handle.solve(rhs)
        else:
            c = step(handle, B, G, prev.coeffs)
        sol = SlabSolution(n, ts, n * tau, c)
        iters = handle.iterations[-1] if handle.iterations else 0
        res.residuals.append(ResidualEntry(n, getattr(handle, "last_residual", 0.0), iters))
        rec = dg.energy_identity_residual(basis, specs, sol, initial if prev is None else prev, degree)
        res.energy.append(rec)
        if monitor:
            res.boundary.append(dg.transparency_monitor(basis, specs, sol, degree))
        if energy_region is not None:
            res.region_energy.append(dg.discrete_energy(sol, basis, elements=energy_region, degree=degree))
        if reference is not None:
            a, b = dg.slab_error_terms(basis, sol, reference)
            err_num += a
            err_den += b
        if keep:
            res.solutions.append(sol)
        if callback is not None:
            callback(n, sol, rec, basis)
        prev = sol
    res.timings["march"] = clock() - t1
    if reference is not None:
        res.error = float(np.sqrt(err_num / err_den)) if err_den > 0 else float(np.sqrt(err_num))
    if not keep:
        res.solutions = [prev]
    log.info("run: %d slabs, %d dofs, %s solver, %.2fs", m, basis.n_dofs, handle.method,
             clock() - t0)
    return res
