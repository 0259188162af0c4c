import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fieldspectra import (
    CoefficientKernel,
    GaussianColumnsField,
    IIDField,
    InnovationSpec,
    LinearField,
    VolterraField,
    VolterraKernel,
)

settings.register_profile(
    "ci",
    max_examples=25,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


# The 2-d moving-average kernel used throughout: covariance range 1, complex
# transfer function (so phase conventions actually matter in tests).
TEST_KERNEL_2D = {(0, 0): 1.0, (1, 0): 0.5, (0, 1): -0.3}
TEST_VOLTERRA_2D = [((0, 0), (1, 0), 1.0), ((1, 1), (0, 1), 0.5)]


@pytest.fixture
def linear_model():
    return LinearField(kernel=CoefficientKernel(TEST_KERNEL_2D))


@pytest.fixture
def volterra_model():
    return VolterraField(kernel=VolterraKernel(TEST_VOLTERRA_2D))


@pytest.fixture
def iid_model():
    return IIDField(innovations=InnovationSpec.standard_normal())


@pytest.fixture
def columns_model():
    return GaussianColumnsField(phi=0.6)


BASE_SEED = 20260811
RETRY_SEED = 20260812


def two_strike(check, label: str = "") -> None:
    """Run a seeded Monte Carlo check; retry once on an independent seed.

    ``check`` takes a master seed and raises AssertionError on failure.  A
    correctly implemented statistic at our tolerances fails a single seed with
    probability well under 1 percent, so demanding two independent failures
    keeps the suite deterministic in practice without loosening any band.
    """
    try:
        check(BASE_SEED)
    except AssertionError as first:
        try:
            check(RETRY_SEED)
        except AssertionError as second:
            raise AssertionError(
                f"{label or 'check'} failed on both seeds: {first} / {second}"
            ) from second


def assert_close(actual, expected, rel=1e-12, abs_tol=0.0, label=""):
    actual, expected = float(actual), float(expected)
    tol = max(abs_tol, rel * max(abs(actual), abs(expected)))
    assert abs(actual - expected) <= tol, (
        f"{label or 'value'}: {actual!r} != {expected!r} (tol {tol:.3e})"
    )


def midpoint_grid(resolution: int, ndim: int) -> np.ndarray:
    """Tensor midpoint nodes over [-pi, pi)^d, flattened to (N, d)."""
    axis = -np.pi + (np.arange(resolution) + 0.5) * 2.0 * np.pi / resolution
    mesh = np.meshgrid(*([axis] * ndim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)
