"""Exact simulation and bias analysis for discretized continuous-time
treatment-outcome processes."""

from .estimands import (
    EstimandReport,
    TreatmentPlan,
    estimand_report,
    identification_bias,
    identification_bias_expanded,
    plan_integral,
    theta_g,
    theta_naive,
    theta_naive_limit,
    true_eta,
)
from .estimation import (
    BootstrapFailureError,
    ContrastEstimate,
    DegenerateDesignError,
    TransitionFit,
    ZetaReport,
    bootstrap_ci,
    estimate_contrast,
    fit_transition,
    gformula_plugin,
    sensitivity_ratio,
    zeta,
)
from .linalg2 import EigenPair2, eigen2, matexp, matexp_oracle, s0s1
from .sde import (
    Grid,
    ModelParams,
    TrajectoryPanel,
    TransitionLaw,
    read_panel_csv,
    simulate_counterfactual,
    simulate_panel,
    subsample_panel,
    transition_law,
    write_panel_csv,
)

__version__ = "0.1.0"
