"""Loss-carry-forward taxation of spectrally negative risk processes.

Exact taxed sample paths, latent/natural rate conversions, q-scale function
analytics for the two-sided exit problem, and Monte Carlo validation.
"""

from .errors import AdmissibilityError, ConfigError, DomainError
from .montecarlo import MCEstimate, estimate_exit_transform, estimate_survival
from .paths import (
    BrownianWithDrift,
    CramerLundberg,
    PiecewiseLinearPath,
    RngStream,
    first_passage,
    generate_brownian_drift,
    generate_cramer_lundberg,
    path_from_claims,
    read_path_csv,
    running_max,
    write_path_csv,
)
from .rates import (
    Constant,
    GammaBarMap,
    Lipschitz,
    PiecewiseConstant,
    RateFunction,
    RateOdeSolution,
    Tabulated,
    constant_rate,
    gamma_bar,
    kappa_to_delta,
    latent_to_natural,
    natural_to_latent,
    solve_rate_ode,
    two_level_rate,
)
from .scale import (
    ExitProblem,
    ScaleFunction,
    SurvivalResult,
    exit_transform,
    laplace_identity_errors,
    phi_0,
    scale_function,
    survival_probability,
)
from .taxation import (
    TaxedPath,
    apply_latent_tax,
    apply_natural_tax,
    check_max_time_equality,
    euler_fixed_point_oracle,
    first_passage_taxed,
    stieltjes_oracle,
)

__version__ = "0.1.0"
