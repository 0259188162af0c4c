import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fieldspectra import (
    FrequencyPoint,
    IIDField,
    InvalidDensityError,
    InvalidShapeError,
    LatticeSample,
    LatticeShape,
    StreamKey,
    analytic_covariance,
    analytic_spectral_density,
    density_fn,
    fejer_kernel,
    fejer_smoothed_variance,
    fourier_sum,
    fourier_sum_grid,
    is_generic,
    periodogram,
    rotated_sum,
    simulate,
    spectral_density_partial_sum,
)

from .conftest import assert_close, two_strike

TWO_PI = 2.0 * math.pi


def _sample_from(values) -> LatticeSample:
    values = np.asarray(values, dtype=np.float64)
    return LatticeSample(
        shape=LatticeShape(values.shape), values=values, model=IIDField(), key=StreamKey(0)
    )


# ---------------------------------------------------------------------------
# frequency points


def test_frequency_point_validation():
    t = FrequencyPoint((1.0, -0.9))
    assert t.generic
    with pytest.raises(InvalidShapeError):
        FrequencyPoint((math.pi,))
    with pytest.raises(InvalidShapeError):
        FrequencyPoint(())


def test_genericity_guard():
    assert not is_generic((0.0,))
    assert not is_generic((math.pi / 2,))
    assert not is_generic((-math.pi / 3, 1.0))
    assert is_generic((1.0, 1.114213562373095))
    assert not FrequencyPoint((0.0, 1.0)).generic


# ---------------------------------------------------------------------------
# Fourier sums


def test_fourier_sum_single_impulse():
    values = np.zeros((3, 3))
    values[0, 0] = 1.0  # lattice site (1, 1)
    t = (0.7, -1.1)
    got = fourier_sum(_sample_from(values), t).value
    want = np.exp(1j * (t[0] + t[1]))
    assert abs(got - want) < 1e-15


def test_fourier_sum_at_zero_is_plain_sum():
    values = np.arange(12.0).reshape(3, 4)
    got = fourier_sum(_sample_from(values), (0.0, 0.0)).value
    assert got.imag == 0.0
    assert got.real == values.sum()


def test_fourier_sum_hand_evaluated_2x2():
    got = fourier_sum(_sample_from(np.ones((2, 2))), (math.pi / 2, 0.0)).value
    want = 2.0 * complex(-1.0, 1.0)  # (e^{i pi/2} + e^{i pi}) * 2
    assert abs(got - want) < 1e-14


def test_rotated_sum_matches_fourier_sum():
    rng = np.random.default_rng(3)
    values = rng.normal(size=(7, 5))
    t = (1.0, -0.9)
    direct = fourier_sum(_sample_from(values), t).value
    fast = rotated_sum(values, t)
    assert abs(fast - direct) <= 1e-12 * max(1.0, abs(direct))


@given(
    arrays(
        np.float64,
        st.tuples(st.integers(2, 6), st.integers(2, 6)),
        elements=st.floats(-1000, 1000, allow_nan=False, width=32),
    )
)
def test_grid_matches_direct_on_fourier_frequencies(values):
    sample = _sample_from(values)
    grid = fourier_sum_grid(sample)
    scale = max(1.0, float(np.abs(values).sum()))
    for freq, got in grid.items():
        want = fourier_sum(sample, freq).value
        assert abs(got - want) <= 1e-10 * scale


def test_grid_constant_field_concentrates_at_zero():
    sample = _sample_from(np.ones((4, 4)))
    grid = fourier_sum_grid(sample)
    assert abs(grid[(0.0, 0.0)] - 16.0) < 1e-12
    for freq, val in grid.items():
        if freq != (0.0, 0.0):
            assert abs(val) < 1e-12


def test_grid_impulse_has_unit_modulus_everywhere():
    values = np.zeros((4, 4))
    values[0, 0] = 1.0
    for val in fourier_sum_grid(_sample_from(values)).values():
        assert abs(abs(val) - 1.0) < 1e-12


def test_plancherel_on_grid():
    rng = np.random.default_rng(11)
    values = rng.normal(size=(16, 16))
    grid = fourier_sum_grid(_sample_from(values))
    lhs = sum(abs(v) ** 2 for v in grid.values())
    rhs = values.size * float(np.sum(values**2))
    assert abs(lhs - rhs) <= 1e-10 * rhs


def test_plancherel_3d():
    rng = np.random.default_rng(12)
    values = rng.normal(size=(5, 4, 3))
    grid = fourier_sum_grid(_sample_from(values))
    lhs = sum(abs(v) ** 2 for v in grid.values())
    rhs = values.size * float(np.sum(values**2))
    assert abs(lhs - rhs) <= 1e-10 * rhs


# ---------------------------------------------------------------------------
# periodogram


def test_periodogram_zero_field():
    assert periodogram(_sample_from(np.zeros((4, 4))), (1.0, 0.5)) == 0.0


def test_periodogram_single_impulse():
    values = np.zeros((4, 4))
    values[2, 1] = 1.0
    got = periodogram(_sample_from(values), (1.0, -0.9))
    assert_close(got, 1.0 / (TWO_PI**2 * 16), rel=1e-12)


def test_periodogram_even_in_t():
    rng = np.random.default_rng(5)
    sample = _sample_from(rng.normal(size=(6, 6)))
    a = periodogram(sample, (1.0, -0.9))
    b = periodogram(sample, (-1.0, 0.9))
    assert_close(a, b, rel=1e-12)


# ---------------------------------------------------------------------------
# Fejer kernel


def test_fejer_kernel_at_zero():
    for n in (1, 2, 5):
        assert_close(fejer_kernel(n, 0.0), float(n), rel=1e-12)


def test_fejer_kernel_order_one_is_flat():
    x = np.linspace(-math.pi, math.pi, 101)
    assert np.allclose(fejer_kernel(1, x), 1.0, atol=1e-12)


def test_fejer_kernel_matches_cosine_series():
    x = np.linspace(-3.0, 3.0, 57)
    for n in (2, 3, 8):
        series = np.ones_like(x)
        for j in range(1, n):
            series += 2.0 * (1.0 - j / n) * np.cos(j * x)
        assert np.allclose(fejer_kernel(n, x), series, atol=1e-10)


def test_fejer_kernel_normalization_by_quadrature():
    m = 4096
    x = -math.pi + (np.arange(m) + 0.5) * TWO_PI / m
    for n in (1, 3, 8):
        integral = float(np.sum(fejer_kernel(n, x))) * TWO_PI / m
        assert abs(integral / TWO_PI - 1.0) < 1e-8


def test_fejer_kernel_positive_and_periodic():
    rng = np.random.default_rng(9)
    x = rng.uniform(-50.0, 50.0, size=10_000)
    for n in (2, 7, 64):
        vals = fejer_kernel(n, x)
        assert np.all(vals >= 0.0)
    assert_close(fejer_kernel(5, 1.0), fejer_kernel(5, 1.0 + TWO_PI), rel=1e-9)
    assert fejer_kernel(5, TWO_PI) == pytest.approx(5.0, abs=1e-9)


def test_fejer_kernel_rejects_bad_order():
    with pytest.raises(ValueError):
        fejer_kernel(0, 1.0)


# ---------------------------------------------------------------------------
# smoothed-variance identity


def test_smoothed_variance_constant_density():
    f = lambda pts: np.full(pts.shape[0], 1.0 / TWO_PI**2)
    got = fejer_smoothed_variance(f, LatticeShape((8, 4)), (1.0, -0.9))
    assert_close(got, 1.0, rel=1e-10)


def test_smoothed_variance_order_one_gives_gamma0(linear_model):
    f = density_fn(linear_model)
    got = fejer_smoothed_variance(f, LatticeShape((1, 1)), (1.0, -0.9), 256)
    assert_close(got, analytic_covariance(linear_model, (0, 0)), rel=1e-10)


def test_smoothed_variance_rejects_negative_density():
    f = lambda pts: np.full(pts.shape[0], -1.0)
    with pytest.raises(InvalidDensityError):
        fejer_smoothed_variance(f, LatticeShape((4, 4)), (1.0, -0.9))
    g = lambda pts: np.full(pts.shape[0], float("nan"))
    with pytest.raises(InvalidDensityError):
        fejer_smoothed_variance(g, LatticeShape((4, 4)), (1.0, -0.9))


def test_variance_identity_monte_carlo_all_models(
    iid_model, linear_model, volterra_model, columns_model
):
    """E|S_n(t)|^2 / N matches the Fejer-smoothed integral within 3 SE."""
    shape = LatticeShape((16, 16))
    freqs = [(1.0, 1.114213562373095), (1.1999816148643265, -0.9), (0.5, 2.3),
             (-2.0, 0.7), (2.3, 1.0)]
    replicates = 500

    def check(seed):
        for m_i, model in enumerate((iid_model, linear_model, volterra_model, columns_model)):
            f = density_fn(model, ndim=2)
            for t in freqs:
                target = fejer_smoothed_variance(f, shape, t)
                vals = np.empty(replicates)
                for r in range(replicates):
                    s = simulate(model, shape, StreamKey(seed + m_i, r, 0))
                    vals[r] = abs(rotated_sum(s.values, t)) ** 2 / shape.n_sites
                se = vals.std(ddof=1) / math.sqrt(replicates)
                assert abs(vals.mean() - target) < 3.0 * se, (type(model).__name__, t)

    two_strike(check, "variance identity")


def test_fejer_lebesgue_limit_monotone(linear_model):
    f = density_fn(linear_model)
    t = (1.0, 1.114213562373095)
    target = TWO_PI**2 * analytic_spectral_density(linear_model, t)
    gaps = [
        abs(fejer_smoothed_variance(f, LatticeShape((n, n)), t) - target)
        for n in (8, 16, 32, 64)
    ]
    assert all(b < a for a, b in zip(gaps, gaps[1:])), gaps


# ---------------------------------------------------------------------------
# covariance partial sums


def test_partial_sum_iid_any_radius():
    model = IIDField()
    for radius in (1, 2, 5):
        got = spectral_density_partial_sum(model, (1.0, -0.9), radius)
        assert_close(got, 1.0 / TWO_PI**2, rel=1e-12)


def test_partial_sum_linear_exact_beyond_range(linear_model):
    for t in [(1.0, 1.114213562373095), (0.5, 2.3), (-2.0, 0.7)]:
        exact = analytic_spectral_density(linear_model, t)
        for radius in (1, 2, 4):
            got = spectral_density_partial_sum(linear_model, t, radius)
            assert abs(got - exact) < 1e-12


def test_partial_sum_nonnegative_at_full_radius(volterra_model):
    rng = np.random.default_rng(21)
    for _ in range(50):
        t = tuple(rng.uniform(-math.pi, math.pi, size=2))
        got = spectral_density_partial_sum(volterra_model, t, 1)
        assert got >= -1e-12
