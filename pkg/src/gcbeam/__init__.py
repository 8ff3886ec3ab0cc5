"""One-dimensional generalised-continuum beams in three kinematic regimes.

The package builds the Euler-Lagrange systems of the non-holonomic,
semi-holonomic and holonomic beam models, solves them with second-order
finite differences, and provides the energy, defect, dependency-graph and
penalty-limit tools used to verify them.
"""

from ._discrete import IllPosedError, SolverError
from .assembly import (
    ConfigError,
    LinearBVP,
    LoadSupportError,
    assemble_bending_subsystem,
    assemble_full,
    assemble_traction_subsystem,
)
from .defects import curl_P, curvature, defect_report, torsion
from .energy import (
    EnergyBreakdown,
    InadmissibleTestError,
    external_energy,
    internal_energy,
    total_energy,
    weak_residual,
)
from .model import (
    BeamConfig,
    BoundarySpec,
    FieldState,
    LoadSet,
    Regime,
    ValidationReport,
    cantilever_bcs,
    reconstruct_3d,
    validate_config,
)
from .solver import DiscreteSystem, discretize, grid_refinement_study, solve
from .structure import DependencyGraph, build_graph, connected_components, verify_block_structure
from .validation import (
    SweepResult,
    classical_reference,
    d_limit_sweep,
    e_limit_sweep,
    oracle_minimize,
)

__all__ = [
    "BeamConfig",
    "BoundarySpec",
    "ConfigError",
    "DependencyGraph",
    "DiscreteSystem",
    "EnergyBreakdown",
    "FieldState",
    "IllPosedError",
    "InadmissibleTestError",
    "LinearBVP",
    "LoadSet",
    "LoadSupportError",
    "Regime",
    "SolverError",
    "SweepResult",
    "ValidationReport",
    "assemble_bending_subsystem",
    "assemble_full",
    "assemble_traction_subsystem",
    "build_graph",
    "cantilever_bcs",
    "classical_reference",
    "connected_components",
    "curl_P",
    "curvature",
    "d_limit_sweep",
    "defect_report",
    "discretize",
    "e_limit_sweep",
    "external_energy",
    "grid_refinement_study",
    "internal_energy",
    "oracle_minimize",
    "reconstruct_3d",
    "solve",
    "torsion",
    "total_energy",
    "validate_config",
    "verify_block_structure",
    "weak_residual",
]
