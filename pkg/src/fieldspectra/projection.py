"""Projection operators, the martingale-difference series, and its uses.

For fields driven by independent centered innovations, every conditional
expectation ``E[. | sigma(xi_j : j <= w)]`` acts monomial-wise on finite sums
of innovation monomials: a monomial survives iff all its innovation indices
are coordinate-wise ``<= w``, and dies otherwise (a non-measurable factor is
replaced by its mean, which is zero).  Composing the per-axis differences
``E_0 - E_{-1}`` therefore keeps a monomial in the site-0 projection exactly
when the coordinate-wise maximum of its index set is the origin.  This makes
the projection of every implemented field an exact, auditable list of
monomials instead of a Monte Carlo estimate.

On top of that calculus the module builds the site-0 difference series

    D_0(t) = sum_j exp(i j.t) P_0 X_j             (finite for finite kernels)

whose translates form a coordinate-wise martingale-difference field, the
rotated martingale ``M_n(t) = sum_j exp(i j.t) D_j(t)`` that approximates the
Fourier sum ``S_n(t)``, and estimators of the spectral density
``f(t) = (2 pi)^{-d} E|D_0(t)|^2`` and of the normalized approximation error
``E|S_n(t) - M_n(t)|^2 / (n_1 ... n_d)``.

Phase convention: the series carries ``exp(+i j.t)``, matching the rotation of
the Fourier sum itself.  For a real field the two sign choices have equal
second moments (the density representation holds for both), but only this one
makes the interior coefficient of each innovation in ``M_n(t)`` coincide with
its coefficient in ``S_n(t)``, so only this one drives the normalized gap to
zero.  With ``exp(-i j.t)`` the linear-model gap converges to
``4 sigma^2 (Im A(t))^2 > 0`` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidShapeError, PairingError, UnsupportedModelError
from .models import (
    FieldModel,
    GaussianColumnsField,
    IIDField,
    LatticeSample,
    LatticeShape,
    LinearField,
    VolterraField,
    canonical_halo,
    field_from_innovations,
    innovation_spec,
    model_dim,
)
from .rng import InnovationLattice, StreamKey, _draw, make_stream, sample_innovations
from .spectral import FrequencyPoint, _freq_coords, rotated_sum

Lag = tuple[int, ...]
TWO_PI = 2.0 * math.pi


def _as_lag(lag: Sequence[int]) -> Lag:
    return tuple(int(x) for x in lag)


def _projection_dim(model: FieldModel, fallback: int | None = None) -> int:
    d = model_dim(model)
    if d is None:
        d = fallback
    if d is None:
        raise InvalidShapeError("dimension is ambiguous; pass a frequency or lag")
    return d


def _check_projectable(model: FieldModel) -> None:
    if isinstance(model, GaussianColumnsField):
        raise UnsupportedModelError(
            "GaussianColumns projections have no finite symbolic form; "
            "they would need numeric conditional expectations"
        )


def project_p0(model: FieldModel, j: Sequence[int]) -> list[tuple[float, tuple[Lag, ...]]]:
    """Exact monomial list of ``P_0 X_j``: pairs ``(coefficient, indices)``.

    ``indices`` are the innovation sites of one monomial, sorted canonically.
    The list is empty when the projection vanishes.
    """
    _check_projectable(model)
    j = _as_lag(j)
    if isinstance(model, IIDField):
        zero = (0,) * len(j)
        return [(1.0, (zero,))] if j == zero else []
    if isinstance(model, LinearField):
        if len(j) != model.kernel.dim:
            raise InvalidShapeError(f"lag {j} has dimension != {model.kernel.dim}")
        a = model.kernel.coefficient(j)
        if a == 0.0:
            return []
        zero = (0,) * len(j)
        return [(a, (zero,))]
    if not isinstance(model, VolterraField):
        raise UnsupportedModelError(f"no projection rule for {type(model).__name__}")
    if len(j) != model.kernel.dim:
        raise InvalidShapeError(f"lag {j} has dimension != {model.kernel.dim}")
    # X_j = sum a_{u,v} xi_{j-u} xi_{j-v}; the monomial survives P_0 iff the
    # coordinate-wise max of (j-u, j-v) is 0, i.e. j = min(u, v) per axis.
    out: list[tuple[float, tuple[Lag, ...]]] = []
    for u, v, a in model.kernel.entries:
        meet = tuple(min(x, y) for x, y in zip(u, v))
        if meet == j:
            idx = tuple(sorted((tuple(jx - ux for jx, ux in zip(j, u)),
                                tuple(jx - vx for jx, vx in zip(j, v)))))
            out.append((a, idx))
    return out


def contributing_lags(model: FieldModel) -> tuple[Lag, ...]:
    """Lags ``j`` with ``P_0 X_j != 0`` (finite for all projectable models)."""
    _check_projectable(model)
    if isinstance(model, IIDField):
        return ((0,),)  # dimension resolved by the caller
    if isinstance(model, LinearField):
        return tuple(lag for lag, a in model.kernel.items if a != 0.0)
    meets = {tuple(min(x, y) for x, y in zip(u, v)) for u, v, _ in model.kernel.entries}
    return tuple(sorted(meets))


def full_truncation_radius(model: FieldModel) -> int:
    """Smallest ``ell`` with ``D_0^{(ell)} = D_0`` exactly."""
    _check_projectable(model)
    if isinstance(model, IIDField):
        return 0
    lags = contributing_lags(model)
    return max((max(abs(x) for x in j) for j in lags), default=0)


@dataclass(frozen=True)
class ProjectionTerm:
    """One grouped monomial of ``D_0(t)``: complex weight times ``prod xi``."""

    coeff: complex
    offsets: tuple[Lag, ...]


@dataclass(frozen=True)
class ProjectionSeries:
    """The truncated series ``D_0^{(ell)}(t)`` in evaluable symbolic form.

    Terms with the same canonical innovation-index set are merged, so the
    listed monomials are pairwise orthogonal in L2 and
    ``E|D_0^{(ell)}(t)|^2 = sum_k |c_k|^2 sigma^(2 #factors)`` exactly.
    """

    model: FieldModel
    t: FrequencyPoint
    ell: int
    terms: tuple[ProjectionTerm, ...]
    sigma2: float

    @property
    def ndim(self) -> int:
        return self.t.ndim

    def window(self) -> tuple[Lag, Lag]:
        """Offset bounds (lo, hi), inclusive, needed around an evaluation site."""
        d = self.ndim
        lo = [0] * d
        hi = [0] * d
        for term in self.terms:
            for off in term.offsets:
                for a in range(d):
                    lo[a] = min(lo[a], off[a])
                    hi[a] = max(hi[a], off[a])
        return tuple(lo), tuple(hi)

    def second_moment(self) -> float:
        """Exact ``E|D_0^{(ell)}(t)|^2`` from the grouped orthogonal terms."""
        total = 0.0
        for term in self.terms:
            total += abs(term.coeff) ** 2 * self.sigma2 ** len(term.offsets)
        return total

    def evaluate_field(self, innovations: InnovationLattice, shape: LatticeShape) -> np.ndarray:
        """``D_j^{(ell)}(t)`` for every grid site ``1 <= j <= n`` (stationary translates)."""
        if shape.ndim != self.ndim:
            raise InvalidShapeError(f"shape {shape.extents} does not match d={self.ndim}")
        n = shape.extents
        out = np.zeros(n, dtype=np.complex128)
        for term in self.terms:
            factor = None
            for off in term.offsets:
                lo = tuple(1 + o for o in off)
                hi = tuple(ni + o for ni, o in zip(n, off))
                block = innovations.block(lo, hi)
                factor = block if factor is None else factor * block
            out += term.coeff * factor
        return out

    def evaluate_at(self, innovations: InnovationLattice, site: Sequence[int]) -> complex:
        site = _as_lag(site)
        total = 0.0 + 0.0j
        for term in self.terms:
            prod = 1.0
            for off in term.offsets:
                prod *= innovations.at(tuple(s + o for s, o in zip(site, off)))
            total += term.coeff * prod
        return complex(total)


def d0_series(model: FieldModel, t, ell: int | None = None) -> ProjectionSeries:
    """Build ``D_0^{(ell)}(t)`` symbolically; ``ell`` defaults to the exact radius."""
    _check_projectable(model)
    point = t if isinstance(t, FrequencyPoint) else FrequencyPoint(tuple(float(c) for c in t))
    d = _projection_dim(model, fallback=point.ndim)
    coords = _freq_coords(point, d)
    if ell is None:
        ell = max(1, full_truncation_radius(model))
    ell = int(ell)
    if ell < 1:
        raise ValueError(f"truncation must be a positive integer, got {ell}")
    grouped: dict[tuple[Lag, ...], complex] = {}
    for j in contributing_lags(model):
        if isinstance(model, IIDField):
            j = (0,) * d
        if max((abs(x) for x in j), default=0) > ell:
            continue
        phase = complex(np.exp(1j * float(np.dot(j, coords))))
        for a, offsets in project_p0(model, j):
            grouped[offsets] = grouped.get(offsets, 0.0 + 0.0j) + a * phase
    terms = tuple(ProjectionTerm(coeff=c, offsets=o) for o, c in sorted(grouped.items()))
    spec = innovation_spec(model)
    return ProjectionSeries(model=model, t=point, ell=ell, terms=terms, sigma2=spec.variance)


def d0_truncated(series: ProjectionSeries, innovations: InnovationLattice) -> complex:
    """Evaluate ``D_0^{(ell)}(t)`` on one innovation configuration."""
    return series.evaluate_at(innovations, (0,) * series.ndim)


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with its standard error."""

    value: float
    standard_error: float
    replicates: int


def spectral_density_projection_mc(
    model: FieldModel,
    t,
    ell: int | None = None,
    replicates: int = 10_000,
    key: StreamKey = StreamKey(0),
) -> McEstimate:
    """Estimate ``f(t) = (2 pi)^{-d} E|D_0(t)|^2`` by Monte Carlo.

    Requires ``ell`` at (or defaulting to) the exact truncation radius, so the
    estimator is unbiased: the only error is the reported standard error.
    """
    series = d0_series(model, t, ell)
    if series.ell < full_truncation_radius(model):
        raise ValueError(
            f"truncation {series.ell} is below the exact radius "
            f"{full_truncation_radius(model)}; the estimator would be biased"
        )
    replicates = int(replicates)
    if replicates < 2:
        raise ValueError("need at least 2 replicates for a standard error")
    d = series.ndim
    norm = TWO_PI**d
    if not series.terms:
        return McEstimate(0.0, 0.0, replicates)
    lo, hi = series.window()
    wshape = tuple(h - l + 1 for l, h in zip(lo, hi))
    stream = make_stream(key)
    draws = _draw(stream, innovation_spec(model), (replicates, *wshape))
    vals = np.zeros(replicates, dtype=np.complex128)
    for term in series.terms:
        prod = np.full(replicates, term.coeff, dtype=np.complex128)
        for off in term.offsets:
            pos = tuple(o - l for o, l in zip(off, lo))
            prod = prod * draws[(slice(None),) + pos]
        vals += prod
    sq = np.abs(vals) ** 2
    est = float(np.mean(sq)) / norm
    se = float(np.std(sq, ddof=1)) / math.sqrt(replicates) / norm
    return McEstimate(est, se, replicates)


@dataclass(frozen=True)
class MartingaleSum:
    value: complex
    shape: LatticeShape
    t: FrequencyPoint
    ell: int


def _paired_innovations(model: FieldModel, shape: LatticeShape, stream) -> InnovationLattice:
    # same window as models.simulate, so the draws coincide site-by-site
    return sample_innovations(stream, innovation_spec(model), shape, halo=canonical_halo(model))


def martingale_sum(
    model: FieldModel,
    shape: LatticeShape,
    t,
    ell: int | None = None,
    key: StreamKey = StreamKey(0),
    paired_sample: LatticeSample | None = None,
) -> MartingaleSum:
    """``M_n(t) = sum_{1<=j<=n} exp(i j.t) D_j^{(ell)}(t)`` on the key's draws.

    When ``paired_sample`` is given it must have been simulated from the same
    key, model, and shape; otherwise the two statistics would not live on one
    probability space and their difference would be meaningless.
    """
    series = d0_series(model, t, ell)
    if paired_sample is not None:
        if paired_sample.key != key:
            raise PairingError(
                f"paired sample key {paired_sample.key} does not match {key}"
            )
        if paired_sample.model != model or paired_sample.shape != shape:
            raise PairingError("paired sample was simulated from a different model or shape")
    stream = make_stream(key)
    innovations = _paired_innovations(model, shape, stream)
    field = series.evaluate_field(innovations, shape)
    value = rotated_sum(field, series.t.coords)
    return MartingaleSum(value=value, shape=shape, t=series.t, ell=series.ell)


def martingale_approx_error(
    model: FieldModel,
    shape: LatticeShape,
    t,
    ell: int | None = None,
    replicates: int = 500,
    key: StreamKey = StreamKey(0),
) -> McEstimate:
    """Monte Carlo estimate of ``E|S_n(t) - M_n(t)|^2 / (n_1 ... n_d)``.

    Each replicate evaluates the field and the martingale differences on one
    shared innovation lattice, then contracts their difference once, so the
    identically-martingale case (IID) gives exactly zero at every replicate.
    """
    series = d0_series(model, t, ell)
    replicates = int(replicates)
    if replicates < 2:
        raise ValueError("need at least 2 replicates for a standard error")
    n_sites = shape.n_sites
    stream = make_stream(key)
    coords = series.t.coords
    errs = np.empty(replicates, dtype=np.float64)
    for r in range(replicates):
        innovations = _paired_innovations(model, shape, stream)
        x_field = field_from_innovations(model, shape, innovations)
        d_field = series.evaluate_field(innovations, shape)
        gap = rotated_sum(x_field - d_field, coords)
        errs[r] = abs(gap) ** 2 / n_sites
    est = float(np.mean(errs))
    se = float(np.std(errs, ddof=1)) / math.sqrt(replicates)
    return McEstimate(est, se, replicates)
