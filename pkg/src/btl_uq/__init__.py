"""Estimation and uncertainty quantification in the Bradley-Terry-Luce model."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BTLError,
    ComparisonDataset,
    DisconnectedGraphError,
    DomainError,
    EstimatorUndefinedError,
    center,
    merit_to_pi,
    psi,
    psi_prime,
    read_dataset,
    validate_dataset,
    write_dataset,
)
from .expansion import mle_main_term, remainder_report, spectral_main_term  # noqa: E402
from .inference import (  # noqa: E402
    build_intervals,
    ci_target,
    l2_constant_mle,
    l2_constant_spectral,
    norm_ppf,
    rank_ci,
    rho_mle,
    rho_spectral,
    simultaneous_intervals,
)
from .mle import EstimateReport, MleOptions, fit_mle  # noqa: E402
from .sim import SimConfig, simulate  # noqa: E402
from .spectral import build_transition, fit_spectral, stationary  # noqa: E402
