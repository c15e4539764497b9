"""Posterior predictive variance and test risk of random-features ridge regression.

Closed-form high-dimensional limits, a finite-size simulator and the
experiment drivers comparing them.
"""

__version__ = "0.1.0"

from .activation import (
    Activation,
    ActivationCoefficients,
    gaussian_coefficients,
    get_activation,
    linear,
    relu,
    shifted_relu,
    tanh,
    zeta,
)
from .asymptotics import (
    FixedPointSolution,
    Limits,
    ModelParams,
    ShapeRatios,
    SolverSettings,
    chi_at,
    lambda_opt,
    limits,
    omega,
    ppv_limit,
    rho_star,
    risk_large_sample,
    risk_wide,
    solve_nu,
    training_error_limit,
)
from .errors import *  # noqa: F401,F403
from .simulator import (
    ReplicationSample,
    SimulationConfig,
    ridge_fit,
    ridge_path,
    run_replication,
)
