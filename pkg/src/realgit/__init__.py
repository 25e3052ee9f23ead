"""Numerical toolkit for moment maps of real reductive group actions.

Minimal vectors, orbit-closure diagnostics for tori, the energy gradient
flow of ``|m|^2`` and the resulting stratification, on desk-scale examples.
"""
__version__ = "0.1.0"

from .convex import min_norm_point, zero_in_relative_interior
from .examples import (
    BracketTensor,
    example_action,
    heisenberg,
    jacobi_defect,
    make_bracket_action,
    make_scaling_r2,
    make_sln_conjugation,
    nilsoliton_residual,
    so3,
)
from .moment import (
    FlowOptions,
    FlowResult,
    beta_plus,
    energy,
    flow,
    grad_energy,
    hessian_energy_at_critical,
    moment,
    moment_differential,
)
from .rep import LinearAction, cartan_split, iwasawa_check, load_action, make_action, maximal_torus
from .strata import (
    StratumLabel,
    beta_adapted,
    candidate_labels,
    estimate_check,
    is_semistable_for_hbeta,
    membership_in_stratum,
    minimal_vector_descent,
    project_p_beta,
    q_beta_membership,
    stratum_label,
)
from .torus import (
    closed_orbit_in_closure,
    destabilizing_direction,
    evaluate_phi,
    is_in_null_cone_torus,
    is_orbit_closed,
    minimal_vector_torus,
    orbit_support,
    separation_family,
)
