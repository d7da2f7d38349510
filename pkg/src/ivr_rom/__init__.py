"""Explicit IVR partitioned coupling of FEM and POD-Galerkin ROM subdomains.

Advection-diffusion on two subdomains joined by a Lagrange-multiplier
interface; the multiplier is recovered from a Schur complement solve at every
right-hand-side evaluation, so explicit integrators advance both sides
independently.
"""

from .assembly import OperatorSet, assemble_interface_coupling, assemble_operators, build_beta
from .errors import (
    ConfigurationError,
    DivergenceError,
    EmptyBasisError,
    InvalidArgumentError,
    IVRError,
    MissingBasisError,
    SingularSchurError,
    UnsupportedConfigurationError,
)
from .hybrid import HybridSchur, HybridSide, hybrid_advance, hybrid_rhs, lift
from .integrators import TimeIntegrator, aligned_time_step
from .ivr import (
    CoupledFemState,
    FemSubdomain,
    IVRCoupler,
    SchurOperator,
    build_schur,
    coupled_rhs,
    global_fem_solve,
    ivr_advance,
    monolithic_dae_step,
    solve_lambda,
)
from .mesh import CoupledMesh, SubdomainMesh, build_coupled_mesh, build_global_mesh, classify_boundary
from .pod import (
    PODBasis,
    ReducedBasis,
    TruncationPolicy,
    adjust_snapshots,
    collect_snapshots,
    compute_pod_basis,
    load_basis,
    project_operators,
    save_basis,
)

__version__ = "0.1.0"

__all__ = [
    "OperatorSet",
    "assemble_interface_coupling",
    "assemble_operators",
    "build_beta",
    "ConfigurationError",
    "DivergenceError",
    "EmptyBasisError",
    "InvalidArgumentError",
    "IVRError",
    "MissingBasisError",
    "SingularSchurError",
    "UnsupportedConfigurationError",
    "HybridSchur",
    "HybridSide",
    "hybrid_advance",
    "hybrid_rhs",
    "lift",
    "TimeIntegrator",
    "aligned_time_step",
    "CoupledFemState",
    "FemSubdomain",
    "IVRCoupler",
    "SchurOperator",
    "build_schur",
    "coupled_rhs",
    "global_fem_solve",
    "ivr_advance",
    "monolithic_dae_step",
    "solve_lambda",
    "CoupledMesh",
    "SubdomainMesh",
    "build_coupled_mesh",
    "build_global_mesh",
    "classify_boundary",
    "PODBasis",
    "ReducedBasis",
    "TruncationPolicy",
    "adjust_snapshots",
    "collect_snapshots",
    "compute_pod_basis",
    "load_basis",
    "project_operators",
    "save_basis",
]
