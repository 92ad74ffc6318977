"""Exponential-convergence certificates for power networks under
distributed averaging frequency control, with and without
denial-of-service interruptions of the controller communication.
"""
from .certificate import (
    Certificate,
    CertificateError,
    SectorBounds,
    bregman_distance,
    build_certificate,
    certificate_to_dict,
    controller_transform,
    cosine_box_minimum,
    cross_term_bound,
    gamma_ratio,
    k_lower_bound,
    k_matrix,
    lyapunov_value,
    reference_comparison,
    sector_bounds,
    select_epsilons,
    w_bounds,
    y_vector,
)
from .dos import (
    DoSSchedule,
    dos_measure,
    generate_schedule,
    schedule_from_json,
    schedule_to_json,
    validate_schedule,
)
from .dynamics import (
    SecurityRegionExit,
    SystemState,
    Trajectory,
    lyapunov_samples,
    simulate,
    vector_field,
)
from .equilibrium import (
    Equilibrium,
    InfeasibleEquilibrium,
    optimal_dispatch,
    solve_equilibrium,
)
from .harness import (
    CheckReport,
    DecayReport,
    case_study_setup,
    check_decay,
    check_state_envelope,
    run_case_study,
)
from .network import (
    ConfigError,
    ControllerSetup,
    PowerNetwork,
    build_network,
    weighted_laplacian,
)

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "CertificateError",
    "CheckReport",
    "ConfigError",
    "ControllerSetup",
    "DecayReport",
    "DoSSchedule",
    "Equilibrium",
    "InfeasibleEquilibrium",
    "PowerNetwork",
    "SectorBounds",
    "SecurityRegionExit",
    "SystemState",
    "Trajectory",
    "bregman_distance",
    "build_certificate",
    "build_network",
    "case_study_setup",
    "certificate_to_dict",
    "check_decay",
    "check_state_envelope",
    "controller_transform",
    "cosine_box_minimum",
    "cross_term_bound",
    "dos_measure",
    "gamma_ratio",
    "generate_schedule",
    "k_lower_bound",
    "k_matrix",
    "lyapunov_samples",
    "lyapunov_value",
    "optimal_dispatch",
    "reference_comparison",
    "run_case_study",
    "schedule_from_json",
    "schedule_to_json",
    "sector_bounds",
    "select_epsilons",
    "simulate",
    "solve_equilibrium",
    "validate_schedule",
    "vector_field",
    "w_bounds",
    "weighted_laplacian",
    "y_vector",
    "__version__",
]
