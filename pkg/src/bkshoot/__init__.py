"""Shooting solver for the static spherically symmetric SU(2) Einstein-Yang/Mills system."""

from .integrator import (
    DEFAULT_CONFIG,
    AVanished,
    DerivativeBlowUp,
    ExitThroughWMinusOne,
    IntegrationConfig,
    IntegrationError,
    OrbitFate,
    RestPoint,
    SolutionProfile,
    StayedInGamma,
    WPrimeVanished,
    check_blowup,
    check_bounded_orbit,
    integrate_orbit,
)
from .metric import adm_mass, flatness_report, integrate_T, mass_function, metric_report
from .series import launch_state, series_coefficients
from .shooting import find_lambda_bar, sweep, verify_connection
from .system import (
    DomainError,
    FieldState,
    f_norm_sq,
    field_rhs,
    phi,
    residual_A,
    residual_w,
    rn_solution,
    v_diag,
)

__version__ = "0.1.0"
