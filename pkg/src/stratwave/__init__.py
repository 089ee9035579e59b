"""Numerical toolkit for steady periodic two-layer stratified water waves.

Evaluates the variational energy functional of the flow, its first and
second variations, the governing elliptic system's residuals, and audits
criticality and linear stability on laminar and manufactured solutions.
"""

from .energy import (AuditReport, ResidualReport, VariationBreakdown,
                     audit_criticality, default_gravity_refs, eval_H,
                     fd_first_variation, first_variation, pde_residual,
                     perturbed_state)
from .errors import (AdmissibilityError, BracketError, CollapseError,
                     ConfigError, DimensionCapError, GridSizeError,
                     NewtonError, NonMonotoneError, ProfileDomainError,
                     RankDeficientError, SizeMismatchError, StagnationError,
                     StratwaveError, TraceError, WindowError)
from .geometry import (BOTTOM, INTERFACE, SURFACE, FlowDomain, LayerGrid,
                       SurfaceCurve, area_integral, boundary_normal_derivative,
                       boundary_trace, build_domain, build_grids,
                       line_integral, mapped_gradient, mapped_laplacian)
from .hessian import (HessianMatrix, StabilityVerdict, assemble_hessian,
                      build_perturbation_basis, fd_second_variation,
                      quadratic_form, second_variation,
                      second_variation_terms, spectrum_edge,
                      stability_verdict)
from .laminar import (LaminarFlow, PhysicalFields, StagnationReport,
                      check_no_stagnation, flat_domain, lift_to_state,
                      manufacture_from_streamfunction, recover_physical,
                      solve_laminar)
from .profiles import (BernoulliMap, LayerProfiles, ProfileValidationReport,
                       ScalarProfile, build_bernoulli_map, phi_forward,
                       phi_invert, validate_profiles)
from .state import (FlowState, Perturbation, PhysicalParams, assemble_state,
                    constraint_integrals, perturbation_norm,
                    project_admissible, random_admissible, state_from_dict,
                    state_from_json, state_to_dict, state_to_json)

__version__ = "0.1.0"
