"""Numerical laboratory for spectral decay of reduced density matrices.

Manufactured Coulomb-cusped wavefunctions, Nystrom discretization of the
half-density operator, Schatten and weak-Schatten functionals, sampled
Besov seminorms and Hadamard multiplier probes.
"""

from .besov import SampledFunction, finite_difference, observed_smoothness, seminorm
from .errors import (
    BudgetExceeded,
    ConfigError,
    DegenerateWindow,
    FactorialBudget,
    PreconditionViolated,
    RdmlabError,
    SingularConfiguration,
    StencilOutOfRange,
    StepTooCoarse,
)
from .grid import Cell, TensorGrid, make_grid
from .model import GaussianCore, ParticleConfig, WavefunctionModel
from .operators import DiscreteKernel, Permutation, assemble_psi_matrix, gamma_bold, gram, verify_duality
from .spectra import SingularSpectrum, fit_decay_exponent, schatten_norm, weak_functional

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "Cell",
    "ConfigError",
    "DegenerateWindow",
    "DiscreteKernel",
    "FactorialBudget",
    "GaussianCore",
    "ParticleConfig",
    "Permutation",
    "PreconditionViolated",
    "RdmlabError",
    "SampledFunction",
    "SingularConfiguration",
    "SingularSpectrum",
    "StencilOutOfRange",
    "StepTooCoarse",
    "TensorGrid",
    "WavefunctionModel",
    "assemble_psi_matrix",
    "finite_difference",
    "fit_decay_exponent",
    "gamma_bold",
    "gram",
    "make_grid",
    "observed_smoothness",
    "schatten_norm",
    "seminorm",
    "verify_duality",
    "weak_functional",
]
