import io
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldspectra import (
    CoefficientKernel,
    GaussianColumnsField,
    IIDField,
    InnovationSpec,
    InvalidKernelError,
    InvalidShapeError,
    LatticeShape,
    LinearField,
    StreamKey,
    UnsupportedModelError,
    VolterraField,
    VolterraKernel,
    analytic_covariance,
    analytic_spectral_density,
    covariance_range,
    covariance_support,
    density_fn,
    make_stream,
    model_to_dict,
    sample_innovations,
    sample_to_csv,
    simulate,
    transfer_function,
)
from fieldspectra.config import parse_model
from fieldspectra.models import canonical_halo, field_from_innovations

from .conftest import TEST_KERNEL_2D, TEST_VOLTERRA_2D, assert_close, midpoint_grid

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# kernels and shapes


def test_lattice_shape_validation():
    assert LatticeShape((4, 4)).n_sites == 16
    with pytest.raises(InvalidShapeError):
        LatticeShape((0, 4))
    with pytest.raises(InvalidShapeError):
        LatticeShape((2, 2, 2, 2))
    with pytest.raises(InvalidShapeError):
        LatticeShape(())


def test_coefficient_kernel_validation():
    k = CoefficientKernel(TEST_KERNEL_2D)
    assert k.dim == 2
    assert k.radius == 1
    assert k.coefficient((1, 0)) == 0.5
    assert k.coefficient((5, 5)) == 0.0
    with pytest.raises(InvalidKernelError):
        CoefficientKernel({})
    with pytest.raises(InvalidKernelError):
        CoefficientKernel({(0, 0): 1.0, (1,): 0.5})
    with pytest.raises(InvalidKernelError):
        CoefficientKernel({(0, 0): float("nan")})


def test_volterra_kernel_rejects_diagonal():
    with pytest.raises(InvalidKernelError, match=r"\(1, 1\)"):
        VolterraKernel([((1, 1), (1, 1), 0.3)])
    k = VolterraKernel(TEST_VOLTERRA_2D)
    assert k.dim == 2
    assert k.site_radius == 1


# ---------------------------------------------------------------------------
# simulation


def test_simulate_iid_is_innovation_lattice():
    model = IIDField(innovations=InnovationSpec.rademacher())
    shape = LatticeShape((5, 3))
    key = StreamKey(17)
    sample = simulate(model, shape, key)
    lat = sample_innovations(make_stream(key), model.innovations, shape, halo=0)
    assert np.array_equal(sample.values, lat.block((1, 1), (5, 3)))


def test_simulate_linear_scaling():
    model = LinearField(kernel=CoefficientKernel({(0, 0): 2.5}))
    shape = LatticeShape((6, 6))
    key = StreamKey(21)
    sample = simulate(model, shape, key)
    base = simulate(IIDField(model.innovations), shape, key)
    assert np.allclose(sample.values, 2.5 * base.values, rtol=0, atol=0)


def test_simulate_linear_hand_computed():
    """Four grid cells evaluated by explicit loops from the logged draws."""
    kernel = CoefficientKernel({(0, 0): 1.0, (1, 0): 0.5})
    model = LinearField(kernel=kernel, innovations=InnovationSpec.rademacher())
    shape = LatticeShape((2, 2))
    key = StreamKey(20260811, 3, 0)
    sample = simulate(model, shape, key)
    lat = sample_innovations(
        make_stream(key), model.innovations, shape, halo=canonical_halo(model)
    )
    for u1 in (1, 2):
        for u2 in (1, 2):
            expected = lat.at((u1, u2)) + 0.5 * lat.at((u1 - 1, u2))
            assert sample.values[u1 - 1, u2 - 1] == expected


def test_simulate_is_reproducible(linear_model):
    shape = LatticeShape((8, 8))
    a = simulate(linear_model, shape, StreamKey(4, 2, 0))
    b = simulate(linear_model, shape, StreamKey(4, 2, 0))
    assert np.array_equal(a.values, b.values)


def test_simulate_dim_mismatch(linear_model):
    with pytest.raises(InvalidShapeError):
        simulate(linear_model, LatticeShape((8,)), StreamKey(0))


def test_gaussian_columns_requires_d2():
    with pytest.raises(InvalidShapeError):
        simulate(GaussianColumnsField(0.5), LatticeShape((8,)), StreamKey(0))
    with pytest.raises(ValueError):
        GaussianColumnsField(1.0)


def test_volterra_field_from_innovations_matches_definition(volterra_model):
    shape = LatticeShape((3, 3))
    lat = sample_innovations(
        make_stream(StreamKey(33)),
        volterra_model.innovations,
        shape,
        halo=canonical_halo(volterra_model),
    )
    values = field_from_innovations(volterra_model, shape, lat)
    for k1 in (1, 2, 3):
        for k2 in (1, 2, 3):
            total = 0.0
            for u, v, a in volterra_model.kernel.entries:
                total += a * lat.at((k1 - u[0], k2 - u[1])) * lat.at((k1 - v[0], k2 - v[1]))
            assert_close(values[k1 - 1, k2 - 1], total, rel=1e-14)


# ---------------------------------------------------------------------------
# covariances


def test_iid_covariance():
    model = IIDField()
    assert analytic_covariance(model, (0, 0)) == 1.0
    assert analytic_covariance(model, (1, 0)) == 0.0


def test_linear_covariance_hand_values():
    model = LinearField(kernel=CoefficientKernel({(0, 0): 1.0, (1, 0): 0.5}))
    assert analytic_covariance(model, (0, 0)) == 1.25
    assert analytic_covariance(model, (1, 0)) == 0.5
    assert analytic_covariance(model, (2, 0)) == 0.0


def test_test_kernel_covariances(linear_model):
    assert analytic_covariance(linear_model, (0, 0)) == 1.34
    assert analytic_covariance(linear_model, (1, 0)) == 0.5
    assert analytic_covariance(linear_model, (0, 1)) == -0.3
    assert analytic_covariance(linear_model, (1, -1)) == -0.15
    assert covariance_range(linear_model) == 1


@given(
    st.dictionaries(
        st.tuples(st.integers(-2, 2), st.integers(-2, 2)),
        st.floats(-2, 2, allow_nan=False),
        min_size=1,
        max_size=5,
    ),
    st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
)
def test_covariance_symmetry(coeffs, lag):
    model = LinearField(kernel=CoefficientKernel(coeffs))
    a = analytic_covariance(model, lag)
    b = analytic_covariance(model, tuple(-x for x in lag))
    assert_close(a, b, rel=1e-12, abs_tol=1e-15, label="gamma symmetry")


def _volterra_gamma_bruteforce(kernel: VolterraKernel, lag, sigma2: float) -> float:
    """E[X_0 X_lag] expanded monomial by monomial with moment bookkeeping.

    E prod xi_i over an index multiset factorizes over distinct indices with
    E xi = 0, E xi^2 = sigma2, E xi^3 = 0 (all implemented innovation laws are
    symmetric); any index appearing an odd number of times kills the term.
    """
    total = 0.0
    for u1, v1, a1 in kernel.entries:
        for u2, v2, a2 in kernel.entries:
            idx = Counter(
                [
                    tuple(-x for x in u1),
                    tuple(-x for x in v1),
                    tuple(l - x for l, x in zip(lag, u2)),
                    tuple(l - x for l, x in zip(lag, v2)),
                ]
            )
            if any(c % 2 for c in idx.values()):
                continue
            moment = 1.0
            for c in idx.values():
                moment *= sigma2 if c == 2 else 3.0 * sigma2**2  # c == 4 never occurs
            total += a1 * a2 * moment
    return total


def test_volterra_covariance_vs_bruteforce(volterra_model):
    for lag in [(0, 0), (0, 1), (0, -1), (1, 0), (1, 1), (-1, 1), (2, 0), (0, 2)]:
        brute = _volterra_gamma_bruteforce(volterra_model.kernel, lag, 1.0)
        assert_close(
            analytic_covariance(volterra_model, lag), brute, rel=1e-12, abs_tol=1e-15,
            label=f"gamma{lag}",
        )


def test_volterra_covariance_bruteforce_random_kernels():
    entries_pool = [
        [((0,), (1,), 0.7), ((2,), (-1,), -0.4)],
        [((0, 0), (1, 2), 0.3), ((1, 1), (0, 1), 0.5), ((-1, 0), (0, -1), -0.8)],
        [((0, 0, 0), (1, 0, 1), 1.1), ((0, 1, 0), (1, 1, 1), 0.2)],
    ]
    for entries in entries_pool:
        kernel = VolterraKernel(entries)
        model = VolterraField(kernel=kernel)
        d = kernel.dim
        r = 2 * kernel.site_radius
        for idx in np.ndindex(*([2 * r + 1] * d)):
            lag = tuple(int(x) - r for x in idx)
            brute = _volterra_gamma_bruteforce(kernel, lag, 1.0)
            assert_close(
                analytic_covariance(model, lag), brute, rel=1e-12, abs_tol=1e-15,
                label=f"{entries} gamma{lag}",
            )


def test_volterra_support(volterra_model):
    assert covariance_support(volterra_model) == {(0, -1): 0.5, (0, 0): 1.25, (0, 1): 0.5}
    assert covariance_range(volterra_model) == 1


def test_gaussian_columns_covariance(columns_model):
    phi = columns_model.phi
    assert_close(analytic_covariance(columns_model, (0, 0)), 1 / (1 - phi**2))
    assert_close(analytic_covariance(columns_model, (3, 0)), phi**3 / (1 - phi**2))
    assert analytic_covariance(columns_model, (1, 1)) == 0.0


def test_empirical_covariance_within_5_se(linear_model):
    sample = simulate(linear_model, LatticeShape((256, 256)), StreamKey(101))
    x = sample.values
    n = x.size
    prod0 = x * x
    g0_hat = prod0.mean()
    se0 = prod0.std(ddof=1) / math.sqrt(n)
    assert abs(g0_hat - analytic_covariance(linear_model, (0, 0))) < 5 * se0
    prod1 = x[1:, :] * x[:-1, :]
    g1_hat = prod1.mean()
    se1 = prod1.std(ddof=1) / math.sqrt(prod1.size)
    assert abs(g1_hat - analytic_covariance(linear_model, (1, 0))) < 5 * se1


def test_volterra_centering(volterra_model):
    sample = simulate(volterra_model, LatticeShape((256, 256)), StreamKey(55))
    g0 = analytic_covariance(volterra_model, (0, 0))
    assert abs(sample.values.mean()) < 5 * math.sqrt(g0 / sample.values.size)


def test_gaussian_columns_empirical(columns_model):
    sample = simulate(columns_model, LatticeShape((256, 256)), StreamKey(77))
    x = sample.values
    prod = x[1:, :] * x[:-1, :]
    se = prod.std(ddof=1) / math.sqrt(prod.size)
    assert abs(prod.mean() - analytic_covariance(columns_model, (1, 0))) < 5 * se
    cross = x[:, 1:] * x[:, :-1]
    se_c = cross.std(ddof=1) / math.sqrt(cross.size)
    assert abs(cross.mean()) < 5 * se_c
    var_row0 = x[0].var(ddof=1)  # stationary initialization, no burn-in transient
    assert abs(var_row0 - 1 / (1 - columns_model.phi**2)) < 5 * math.sqrt(2.0 / 256) * (
        1 / (1 - columns_model.phi**2)
    )


# ---------------------------------------------------------------------------
# transfer function and spectral density


def test_transfer_function_trivials(linear_model):
    k = CoefficientKernel({(0, 0): 1.0})
    assert transfer_function(k, (0.3, -0.8)) == 1.0
    total = sum(a for _, a in linear_model.kernel.items)
    assert_close(abs(transfer_function(linear_model.kernel, (0.0, 0.0)) - total), 0.0,
                 abs_tol=1e-15)


def test_transfer_function_derived():
    k = CoefficientKernel({(0, 0): 1.0, (1, 0): 0.5})
    got = transfer_function(k, (math.pi / 3, 2.2))
    want = 1.0 + 0.5 * complex(math.cos(math.pi / 3), -math.sin(math.pi / 3))
    assert abs(got - want) < 1e-14


def test_density_iid_constant():
    model = IIDField()
    assert_close(analytic_spectral_density(model, (1.0, -0.9)), 1.0 / TWO_PI**2)
    single = LinearField(kernel=CoefficientKernel({(0, 0): 1.0}))
    assert_close(
        analytic_spectral_density(single, (1.0, -0.9)),
        analytic_spectral_density(model, (1.0, -0.9)),
    )


def test_density_linear_at_zero():
    model = LinearField(kernel=CoefficientKernel({(0, 0): 1.0, (1, 0): 0.5}))
    assert_close(analytic_spectral_density(model, (0.0, 0.0)), 2.25 / TWO_PI**2)


def test_density_volterra_unsupported(volterra_model):
    with pytest.raises(UnsupportedModelError, match="projection"):
        analytic_spectral_density(volterra_model, (1.0, -0.9))


def test_fourier_consistency_all_models(linear_model, volterra_model, iid_model, columns_model):
    """Quadrature of exp(i lag.x) f(x) over the torus reproduces gamma(lag)."""
    cases = [
        (iid_model, 2, 64),
        (linear_model, 2, 64),
        (volterra_model, 2, 64),
        (columns_model, 2, 512),
    ]
    for model, d, resolution in cases:
        f = density_fn(model, ndim=d)
        pts = midpoint_grid(resolution, d)
        fv = f(pts)
        cell = (TWO_PI / resolution) ** d
        scale = analytic_covariance(model, (0,) * d)
        for lag in [(0, 0), (1, 0), (0, 1), (2, 2), (3, -3), (-1, 2)]:
            quad = np.sum(np.exp(1j * pts @ np.array(lag, float)) * fv) * cell
            gamma = analytic_covariance(model, lag)
            assert abs(quad.real - gamma) < 1e-3 * scale, (model, lag, quad, gamma)
            assert abs(quad.imag) < 1e-9 * scale


def test_parseval_linear_exact(linear_model):
    s2 = linear_model.innovations.variance
    total = s2 * sum(a * a for _, a in linear_model.kernel.items)
    assert total == analytic_covariance(linear_model, (0, 0))


# ---------------------------------------------------------------------------
# serialization


def test_model_dict_roundtrip(linear_model, volterra_model, iid_model, columns_model):
    uniform = IIDField(innovations=InnovationSpec.centered_uniform(0.5))
    for model in (linear_model, volterra_model, iid_model, columns_model, uniform):
        assert parse_model(model_to_dict(model)) == model


def test_sample_to_csv(linear_model):
    sample = simulate(linear_model, LatticeShape((3, 4)), StreamKey(1))
    buf = io.StringIO()
    sample_to_csv(sample, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "u1,u2,value"
    assert len(lines) == 1 + 12
    first = lines[1].split(",")
    assert first[:2] == ["1", "1"]
    assert float(first[2]) == sample.values[0, 0]
