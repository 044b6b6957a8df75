"""Nonlinear squeezing witnesses for quantum non-Gaussian states of a single bosonic mode.

Conventions: ``hbar = 1``, ``x = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(i sqrt(2))``,
so the vacuum has quadrature variance 1/2.
"""

from ._core import BACKEND
from .cost import CostFunction, GaussianThreshold, gaussian_threshold, phase_space_variance, variance_of
from .fock import DEFAULT_N_LEVELS, DensityMatrix, expectation, fidelity, fock_ket
from .gaussian import GaussianUnitaryParams, build_gaussian_unitary, symplectic_of
from .homodyne import (
    MomentEstimate,
    QuadratureRecord,
    QuadratureSet,
    TomographyConfig,
    bootstrap_xi,
    estimate_weyl_moment,
    ml_reconstruct,
    quadrature_pdf,
    sample_quadratures,
    weyl_moment_coefficients,
)
from .states import (
    PhotonAddedSpec,
    coherent_ket,
    dephasing_channel,
    loss_channel,
    photon_added_coherent,
    squeezed_vacuum_ket,
)
from .wigner import WignerGrid, wigner_evaluate, wigner_minimum
from .witness import OptimizerBudget, WitnessResult, certify, nonlinear_squeezing, xi_at

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DEFAULT_N_LEVELS",
    "CostFunction",
    "DensityMatrix",
    "GaussianThreshold",
    "GaussianUnitaryParams",
    "MomentEstimate",
    "OptimizerBudget",
    "PhotonAddedSpec",
    "QuadratureRecord",
    "QuadratureSet",
    "TomographyConfig",
    "WignerGrid",
    "WitnessResult",
    "bootstrap_xi",
    "build_gaussian_unitary",
    "certify",
    "coherent_ket",
    "dephasing_channel",
    "estimate_weyl_moment",
    "expectation",
    "fidelity",
    "fock_ket",
    "gaussian_threshold",
    "loss_channel",
    "ml_reconstruct",
    "nonlinear_squeezing",
    "phase_space_variance",
    "photon_added_coherent",
    "quadrature_pdf",
    "sample_quadratures",
    "squeezed_vacuum_ket",
    "symplectic_of",
    "variance_of",
    "weyl_moment_coefficients",
    "wigner_evaluate",
    "wigner_minimum",
    "xi_at",
]
