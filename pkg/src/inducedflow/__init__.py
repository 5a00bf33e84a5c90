"""Equilibrium states of suspension flows through an induced transfer operator."""
from __future__ import annotations

__version__ = "0.1.0"

from .config import load_model, parse_model
from .exceptions import (
    BranchBoundaryError,
    ConvergenceError,
    DomainError,
    GridResolutionError,
    InducedFlowError,
    ModelError,
    SingularInputError,
    TailError,
)
from .families import BaseInterval, FiniteLinear, GeometricCountable, LorenzTemplate
from .inducing import (
    coboundary_B,
    enumerate_cylinders,
    holder_certificate,
    induced_potential_W,
    induced_roof,
    verify_coboundary_identity,
)
from .model import PotentialSpec, SuspensionPoint, SuspensionSystem, flow_advance, integrate_potential
from .operator import (
    DiscretizedFunction,
    InducedOperator,
    SpectralSolution,
    apply_operator,
    distortion_check,
    eigen_derivative,
    estimate_Zc,
    leading_eigen,
)
from .thermo import (
    abramov_lift,
    entropy_crosscheck,
    entropy_induced,
    gibbs_measure,
    maximizing_value_A,
    mme,
    periodic_bernoulli,
    pressure_curve,
    solve_pressure,
)

__all__ = [name for name in dir() if not name.startswith("_") and name != "annotations"]
