"""Service layer for line scattering with a point transfer condition.

This package contains the numerical work that sits between the command
handlers and the domain types. Keeping it separate keeps the commands
thin and makes each computation easy to unit test.

Nothing in this package reads or writes files or parses arguments.
Services take domain objects, return domain objects or plain arrays,
and raise the exceptions defined in ``scatline.errors`` when something
goes wrong.

Modules
-------
kernel
    Propagators, the transfer jump at the origin and Wronskians.
forward
    Jost solutions, ``A``/``B``, reflection data and bound states.
inverse
    Transfer-matrix reconstruction and the dispersion formula for ``A``.
compact
    ``W(S)`` from data, the m-function, ``Delta`` and potential recovery.
asymval
    Large-lambda validation of the solution asymptotics.
"""

from .kernel import apply_transfer, apply_transfer_inverse, propagate, propagator, line_propagator, wronskian
from .forward import (
    asymptotic_AB_check,
    bound_states,
    continued_AB,
    jost_minus_M,
    jost_plus_M,
    reflection,
    scattering_AB,
    scattering_coefficients,
    unitarity,
)
from .inverse import (
    classify_case,
    dispersion_A,
    dispersion_A_boundary,
    estimate_C1,
    estimate_C2,
    estimate_K,
    invert,
    reconstruct_B,
    reconstruct_M_diag,
    reconstruct_M_offdiag,
)
from .compact import (
    delta_trace,
    dirichlet_eigenvalues,
    fundamental_pair_direct,
    l_curve,
    m_function,
    m_trace,
    recover_potential,
    reconstruct_W_at_S,
    v_solution,
)
from .asymval import (
    asymptotic_error_slope,
    build_contour,
    delta_bound_check,
    p_entry_decay,
    run_appendix_suite,
    v_asymptotic,
    w2_asymptotic,
)

__all__ = [
    "apply_transfer",
    "apply_transfer_inverse",
    "propagate",
    "propagator",
    "line_propagator",
    "wronskian",
    "asymptotic_AB_check",
    "bound_states",
    "continued_AB",
    "jost_minus_M",
    "jost_plus_M",
    "reflection",
    "scattering_AB",
    "scattering_coefficients",
    "unitarity",
    "classify_case",
    "dispersion_A",
    "dispersion_A_boundary",
    "estimate_C1",
    "estimate_C2",
    "estimate_K",
    "invert",
    "reconstruct_B",
    "reconstruct_M_diag",
    "reconstruct_M_offdiag",
    "delta_trace",
    "dirichlet_eigenvalues",
    "fundamental_pair_direct",
    "l_curve",
    "m_function",
    "m_trace",
    "recover_potential",
    "reconstruct_W_at_S",
    "v_solution",
    "asymptotic_error_slope",
    "build_contour",
    "delta_bound_check",
    "p_entry_decay",
    "run_appendix_suite",
    "v_asymptotic",
    "w2_asymptotic",
]
