"""Numerical plurisubharmonic gluing, cone flows and Sasakian checks on flat models."""

from .complex_calculus import (FDScheme, directional_derivative, is_strictly_psh, levi_form, min_eigenvalue)
from .cone_flow import check_unique_intersection, contraction_check, flow, project_to_level, verify_homogeneity
from .extension import GluingConfig, GluingProblem, GluingResult, glue, verify_extension
from .potentials import (Domain, PotentialField, RadialOperator, VarietySpec, euclidean_potential,
                         hopf_potential, log_pole_potential)
from .regularized_max import MollifierKernel, RegMaxParams, reg_max, reg_max_field
from .report import Certificate, VerificationReport
from .sasaki import LevelSetStructure, ReebDirection, quasi_regular_deform, verify_sasaki_identity

__version__ = "0.1.0"
