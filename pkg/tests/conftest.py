import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gridbias import ModelParams, TreatmentPlan

settings.register_profile(
    "ci",
    deadline=None,
    derandomize=True,
    max_examples=75,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

# Reference parameterization used throughout: drift ((0.2, -5), (-3, 0.5)),
# diffusion ((1, 0.3), (0.3, 0.5)), start N((1, 0), 0.25 I), horizon 1.
REF_BETA = np.array([[0.2, -5.0], [-3.0, 0.5]])
REF_SIGMA = np.array([[1.0, 0.3], [0.3, 0.5]])
REF_MEAN = np.array([1.0, 0.0])
REF_COV = 0.25 * np.eye(2)


def make_params(beta12: float = -5.0, beta11: float = 0.2, beta21: float = -3.0,
                sigma=None, init_cov=None) -> ModelParams:
    beta = np.array([[beta11, beta12], [beta21, 0.5]])
    return ModelParams(
        beta=beta,
        sigma=REF_SIGMA if sigma is None else sigma,
        init_mean=REF_MEAN,
        init_cov=REF_COV if init_cov is None else init_cov,
        horizon=1.0,
    )


@pytest.fixture
def ref_params() -> ModelParams:
    return make_params()


@pytest.fixture
def plan_one() -> TreatmentPlan:
    return TreatmentPlan.constant(1.0, horizon=1.0)


@pytest.fixture
def plan_zero() -> TreatmentPlan:
    return TreatmentPlan.constant(0.0, horizon=1.0)
