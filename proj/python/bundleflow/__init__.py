"""Python bindings for the bundleflow core."""

from ._core import (
    ConfigError,
    DomainError,
    IntegratorError,
    SolverError,
    beta,
    einstein_points,
    einstein_state,
    fixed_points,
    integrate,
    jacobian,
    region,
    run_command,
    spectrum_v2,
    vector_field,
    verify,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "IntegratorError",
    "SolverError",
    "beta",
    "einstein_points",
    "einstein_state",
    "fixed_points",
    "integrate",
    "jacobian",
    "region",
    "run_command",
    "spectrum_v2",
    "vector_field",
    "verify",
]
