"""Space-time Trefftz discontinuous Galerkin solver for 2D TM Maxwell problems
with polynomial plane-wave bases and local transparent boundary conditions."""

from .basis import (VACUUM, DirectionTriple, Material, SlabBasis, TrefftzBasis,
                    build_element_basis, build_element_basis_3d, directions_2d, directions_3d,
                    gram_rank, incoming_mask, maxwell_residual)
from .fluxes import PECLike, PMCLike, SilverMueller, Transparent
from .geometry import Domain2D, Mesh, build_uniform_mesh, mesh_with_size
from .scenarios import (Adapted, CylindricalScenario, PlaneWaveScenario, PolynomialWaveScenario,
                        Uniform)
from .stepper import RunResult, SlabSolution, SolverError, run

__version__ = "0.1.0"

__all__ = [
    "VACUUM", "DirectionTriple", "Material", "SlabBasis", "TrefftzBasis", "build_element_basis",
    "build_element_basis_3d", "directions_2d", "directions_3d", "gram_rank", "incoming_mask",
    "maxwell_residual", "PECLike", "PMCLike", "SilverMueller", "Transparent", "Domain2D", "Mesh",
    "build_uniform_mesh", "mesh_with_size", "Adapted", "CylindricalScenario", "PlaneWaveScenario",
    "PolynomialWaveScenario", "Uniform", "RunResult", "SlabSolution", "SolverError", "run",
]
