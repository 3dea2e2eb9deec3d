"""Truncated Safronov-Dubovski coagulation: simulation and numerical checks."""
from .errors import (
    ConfigError,
    HorizonError,
    IntegrationError,
    RangeError,
    StiffnessError,
    UnsupportedKernelError,
    ValidationError,
)
from .integrator import SolverConfig, integrate, integrate_pair
from .kernel import GrowthClass, KernelSpec, SeparableDecomposition, decompose, verify_hypothesis
from .report import ExperimentReport, Observation
from .rhs import BACKEND, RhsWorkspace, moment_rate, rhs_fast, rhs_reference
from .state import (
    ClusterDistribution,
    InitialCondition,
    Trajectory,
    WeightSequence,
    l1_distance,
    make_initial,
    moment,
    norm,
    tail_kappa,
    tail_nu,
    xi,
)

__version__ = "0.1.0"
