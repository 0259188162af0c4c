"""Generative lattice field models and their closed-form second-order theory.

Four stationary, centered models are provided:

* ``IIDField`` - the innovation field itself, ``X_u = xi_u``;
* ``LinearField`` - moving average ``X_k = sum_j a_j xi_{k-j}`` with a finitely
  supported coefficient kernel;
* ``VolterraField`` - second-order polynomial field
  ``X_k = sum_{(u,v)} a_{u,v} xi_{k-u} xi_{k-v}`` with zero diagonal;
* ``GaussianColumnsField`` - independent columns, each a stationary AR(1) with
  standard normal innovations (dimension 2 only).

Kernels are finitely supported by construction, so every covariance and
spectral quantity below is an exact finite sum, not a truncation of one.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import InvalidKernelError, InvalidShapeError, UnsupportedModelError
from .rng import (
    InnovationLattice,
    InnovationSpec,
    StreamKey,
    make_stream,
    sample_innovations,
)

MAX_DIM = 3  # implementation ceiling: desk-scale memory, d in {1, 2, 3}

Lag = tuple[int, ...]


def _as_lag(lag: Sequence[int]) -> Lag:
    return tuple(int(x) for x in lag)


@dataclass(frozen=True)
class LatticeShape:
    """Grid extents ``n = (n_1, ..., n_d)`` for the index box ``1 <= u <= n``."""

    extents: tuple[int, ...]

    def __init__(self, extents: Sequence[int]):
        object.__setattr__(self, "extents", tuple(int(n) for n in extents))
        if not 1 <= len(self.extents) <= MAX_DIM:
            raise InvalidShapeError(
                f"dimension must be between 1 and {MAX_DIM}, got {len(self.extents)}"
            )
        if any(n < 1 for n in self.extents):
            raise InvalidShapeError(f"extents must be >= 1, got {self.extents}")

    @property
    def ndim(self) -> int:
        return len(self.extents)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))


class CoefficientKernel:
    """Finitely supported real coefficients ``a_j`` on the integer lattice.

    Only the explicit support is stored; lags outside it are zero.
    """

    def __init__(self, coeffs: Mapping[Sequence[int], float]):
        items: list[tuple[Lag, float]] = []
        dim = None
        for lag, a in dict(coeffs).items():
            lag = _as_lag(lag)
            a = float(a)
            if dim is None:
                dim = len(lag)
            elif len(lag) != dim:
                raise InvalidKernelError(f"lag {lag} has dimension != {dim}")
            if not math.isfinite(a):
                raise InvalidKernelError(f"coefficient at lag {lag} is not finite: {a}")
            items.append((lag, a))
        if dim is None:
            raise InvalidKernelError("kernel needs at least one coefficient")
        if not 1 <= dim <= MAX_DIM:
            raise InvalidKernelError(f"kernel dimension must be 1..{MAX_DIM}, got {dim}")
        self._items = tuple(sorted(items))
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def items(self) -> tuple[tuple[Lag, float], ...]:
        return self._items

    @property
    def lags(self) -> tuple[Lag, ...]:
        return tuple(lag for lag, _ in self._items)

    @property
    def radius(self) -> int:
        """Max sup-norm of a support lag."""
        return max((max(abs(x) for x in lag) for lag, _ in self._items), default=0)

    def coefficient(self, lag: Sequence[int]) -> float:
        lag = _as_lag(lag)
        for stored, a in self._items:
            if stored == lag:
                return a
        return 0.0

    def sum_of_squares(self) -> float:
        return float(sum(a * a for _, a in self._items))

    def __eq__(self, other) -> bool:
        return isinstance(other, CoefficientKernel) and self._items == other._items

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        body = ", ".join(f"{lag}: {a}" for lag, a in self._items)
        return f"CoefficientKernel({{{body}}})"


class VolterraKernel:
    """Finite set of off-diagonal pairs ``(u, v) -> a_{u,v}``.

    Diagonal pairs are rejected: with ``a_{u,u} = 0`` every product
    ``xi_{k-u} xi_{k-v}`` has distinct factors, which keeps the field centered
    and the projection calculus free of fourth-moment constants.
    """

    def __init__(self, entries: Iterable[tuple[Sequence[int], Sequence[int], float]]):
        norm: list[tuple[Lag, Lag, float]] = []
        dim = None
        for u, v, a in entries:
            u, v = _as_lag(u), _as_lag(v)
            a = float(a)
            if dim is None:
                dim = len(u)
            if len(u) != dim or len(v) != dim:
                raise InvalidKernelError(f"entry ({u}, {v}) has dimension != {dim}")
            if u == v:
                raise InvalidKernelError(f"diagonal entry ({u}, {v}) is not allowed")
            if not math.isfinite(a):
                raise InvalidKernelError(f"coefficient at ({u}, {v}) is not finite: {a}")
            norm.append((u, v, a))
        if dim is None:
            raise InvalidKernelError("kernel needs at least one entry")
        if not 1 <= dim <= MAX_DIM:
            raise InvalidKernelError(f"kernel dimension must be 1..{MAX_DIM}, got {dim}")
        self._entries = tuple(sorted(norm))
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def entries(self) -> tuple[tuple[Lag, Lag, float], ...]:
        return self._entries

    @property
    def site_radius(self) -> int:
        """Max sup-norm over all stored ``u`` and ``v``."""
        r = 0
        for u, v, _ in self._entries:
            r = max(r, max(abs(x) for x in u), max(abs(x) for x in v))
        return r

    def __eq__(self, other) -> bool:
        return isinstance(other, VolterraKernel) and self._entries == other._entries

    def __hash__(self) -> int:
        return hash(self._entries)

    def __repr__(self) -> str:
        body = ", ".join(f"({u}, {v}): {a}" for u, v, a in self._entries)
        return f"VolterraKernel({{{body}}})"


@dataclass(frozen=True)
class IIDField:
    innovations: InnovationSpec = InnovationSpec.standard_normal()


@dataclass(frozen=True)
class LinearField:
    kernel: CoefficientKernel
    innovations: InnovationSpec = InnovationSpec.standard_normal()


@dataclass(frozen=True)
class VolterraField:
    kernel: VolterraKernel
    innovations: InnovationSpec = InnovationSpec.standard_normal()


@dataclass(frozen=True)
class GaussianColumnsField:
    """Independent columns, each a stationary AR(1) with coefficient ``phi``."""

    phi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.phi) and abs(self.phi) < 1):
            raise ValueError(f"AR(1) coefficient must satisfy |phi| < 1, got {self.phi}")


FieldModel = Union[IIDField, LinearField, VolterraField, GaussianColumnsField]


@dataclass(frozen=True)
class LatticeSample:
    """One realization ``X_u`` on ``1 <= u <= n``, reproducible from its key."""

    shape: LatticeShape
    values: np.ndarray
    model: FieldModel
    key: StreamKey


def model_dim(model: FieldModel) -> int | None:
    """Lattice dimension fixed by the model, or None if any is acceptable."""
    if isinstance(model, LinearField):
        return model.kernel.dim
    if isinstance(model, VolterraField):
        return model.kernel.dim
    if isinstance(model, GaussianColumnsField):
        return 2
    return None


def innovation_spec(model: FieldModel) -> InnovationSpec | None:
    if isinstance(model, (IIDField, LinearField, VolterraField)):
        return model.innovations
    return None


def _check_shape(model: FieldModel, shape: LatticeShape) -> None:
    want = model_dim(model)
    if want is not None and shape.ndim != want:
        raise InvalidShapeError(
            f"model is {want}-dimensional but shape {shape.extents} has d={shape.ndim}"
        )


def canonical_halo(model: FieldModel) -> int:
    """Symmetric halo used for all innovation-driven sampling of ``model``.

    Sized so the same lattice serves both the field itself and the translated
    projection differences built on it: the two evaluations stay coupled on a
    shared set of draws only if they request identical windows.
    """
    if isinstance(model, IIDField):
        return 0
    if isinstance(model, LinearField):
        return model.kernel.radius
    if isinstance(model, VolterraField):
        return 2 * model.kernel.site_radius
    raise UnsupportedModelError(f"no innovation halo for {type(model).__name__}")


def field_from_innovations(
    model: FieldModel, shape: LatticeShape, innovations: InnovationLattice
) -> np.ndarray:
    """Evaluate ``X_u`` over ``1 <= u <= n`` as exact finite sums of draws."""
    _check_shape(model, shape)
    n = shape.extents
    ones = (1,) * shape.ndim
    if isinstance(model, IIDField):
        return np.array(innovations.block(ones, n), dtype=np.float64)
    if isinstance(model, LinearField):
        out = np.zeros(n, dtype=np.float64)
        for lag, a in model.kernel.items:
            lo = tuple(1 - j for j in lag)
            hi = tuple(ni - j for ni, j in zip(n, lag))
            out += a * innovations.block(lo, hi)
        return out
    if isinstance(model, VolterraField):
        out = np.zeros(n, dtype=np.float64)
        for u, v, a in model.kernel.entries:
            bu = innovations.block(
                tuple(1 - x for x in u), tuple(ni - x for ni, x in zip(n, u))
            )
            bv = innovations.block(
                tuple(1 - x for x in v), tuple(ni - x for ni, x in zip(n, v))
            )
            out += a * bu * bv
        return out
    raise UnsupportedModelError(f"{type(model).__name__} is not innovation-driven")


def _simulate_gaussian_columns(
    model: GaussianColumnsField, shape: LatticeShape, stream
) -> np.ndarray:
    n1, n2 = shape.extents
    phi = model.phi
    draws = stream.standard_normal((n1, n2))
    values = np.empty((n1, n2), dtype=np.float64)
    # row 0 from the exact stationary law N(0, 1/(1-phi^2)): no burn-in needed
    values[0] = draws[0] / math.sqrt(1.0 - phi * phi)
    for j in range(1, n1):
        values[j] = phi * values[j - 1] + draws[j]
    return values


def simulate(model: FieldModel, shape: LatticeShape, key: StreamKey) -> LatticeSample:
    """Draw one realization of ``model`` on the grid ``1 <= u <= n``.

    The result is a pure function of ``(model, shape, key)``.
    """
    _check_shape(model, shape)
    stream = make_stream(key)
    if isinstance(model, GaussianColumnsField):
        values = _simulate_gaussian_columns(model, shape, stream)
    else:
        innovations = sample_innovations(
            stream, innovation_spec(model), shape, halo=canonical_halo(model)
        )
        values = field_from_innovations(model, shape, innovations)
    return LatticeSample(shape=shape, values=values, model=model, key=key)


def analytic_covariance(model: FieldModel, lag: Sequence[int]) -> float:
    """Closed-form ``gamma(lag) = cov(X_u, X_{u+lag})``."""
    lag = _as_lag(lag)
    want = model_dim(model)
    if want is not None and len(lag) != want:
        raise InvalidShapeError(f"lag {lag} has dimension != {want}")
    if isinstance(model, IIDField):
        return model.innovations.variance if all(x == 0 for x in lag) else 0.0
    if isinstance(model, LinearField):
        s2 = model.innovations.variance
        total = 0.0
        for j, a in model.kernel.items:
            total += a * model.kernel.coefficient(tuple(x + h for x, h in zip(j, lag)))
        return s2 * total
    if isinstance(model, VolterraField):
        s2 = model.innovations.variance
        lookup = {(u, v): a for u, v, a in model.kernel.entries}
        total = 0.0
        for u, v, a in model.kernel.entries:
            up = tuple(x + h for x, h in zip(u, lag))
            vp = tuple(x + h for x, h in zip(v, lag))
            total += a * (lookup.get((up, vp), 0.0) + lookup.get((vp, up), 0.0))
        return s2 * s2 * total
    if isinstance(model, GaussianColumnsField):
        h1, h2 = lag
        if h2 != 0:
            return 0.0
        return model.phi ** abs(h1) / (1.0 - model.phi**2)
    raise UnsupportedModelError(f"unknown model {type(model).__name__}")


def covariance_support(model: FieldModel) -> dict[Lag, float]:
    """All lags with nonzero covariance, exact by finite enumeration.

    Not available for ``GaussianColumnsField`` (geometric tails, no finite
    support).
    """
    if isinstance(model, IIDField):
        raise UnsupportedModelError("IID support depends on dimension; use analytic_covariance")
    if isinstance(model, LinearField):
        diffs = {
            tuple(a - b for a, b in zip(j, jp))
            for j in model.kernel.lags
            for jp in model.kernel.lags
        }
        out = {}
        for h in sorted(diffs):
            g = analytic_covariance(model, h)
            if g != 0.0:
                out[h] = g
        return out
    if isinstance(model, VolterraField):
        r = 2 * model.kernel.site_radius
        d = model.kernel.dim
        out = {}
        for h in np.ndindex(*([2 * r + 1] * d)):
            lag = tuple(int(x) - r for x in h)
            g = analytic_covariance(model, lag)
            if g != 0.0:
                out[lag] = g
        return out
    raise UnsupportedModelError(
        f"{type(model).__name__} has no finite covariance support"
    )


def covariance_range(model: FieldModel) -> int:
    """Smallest radius ``r`` with ``gamma(h) = 0`` for all ``|h|_inf > r``."""
    if isinstance(model, IIDField):
        return 0
    support = covariance_support(model)
    return max((max(abs(x) for x in h) for h in support), default=0)


def _coords(t) -> np.ndarray:
    return np.asarray(getattr(t, "coords", t), dtype=np.float64)


def transfer_function(kernel: CoefficientKernel, t) -> complex:
    """``A(t) = sum_j a_j exp(-i j.t)`` over the kernel support."""
    coords = _coords(t)
    if coords.shape != (kernel.dim,):
        raise InvalidShapeError(f"frequency has dimension != {kernel.dim}")
    total = 0.0 + 0.0j
    for lag, a in kernel.items:
        total += a * np.exp(-1j * float(np.dot(lag, coords)))
    return complex(total)


def analytic_spectral_density(model: FieldModel, t) -> float:
    """Closed-form spectral density ``f(t)``.

    Volterra fields have no closed form here; estimate ``f`` with the
    projection Monte Carlo estimator or the covariance partial sum instead.
    """
    coords = _coords(t)
    d = len(coords)
    if isinstance(model, IIDField):
        return model.innovations.variance / (2.0 * math.pi) ** d
    if isinstance(model, LinearField):
        if d != model.kernel.dim:
            raise InvalidShapeError(f"frequency has dimension != {model.kernel.dim}")
        amp = transfer_function(model.kernel, coords)
        return model.innovations.variance * abs(amp) ** 2 / (2.0 * math.pi) ** d
    if isinstance(model, GaussianColumnsField):
        if d != 2:
            raise InvalidShapeError("GaussianColumns density needs a 2-d frequency")
        t1 = float(coords[0])
        ar = 1.0 / (2.0 * math.pi * (1.0 - 2.0 * model.phi * math.cos(t1) + model.phi**2))
        return ar / (2.0 * math.pi)
    raise UnsupportedModelError(
        "Volterra fields have no closed-form density; use "
        "spectral_density_projection_mc (or the covariance partial sum)"
    )


def density_fn(model: FieldModel, ndim: int | None = None):
    """Vectorized ``f``: maps an ``(N, d)`` array of frequencies to ``(N,)``.

    Exact for every model: Volterra uses its complete (finite) covariance
    series, the rest their closed forms.
    """
    d = model_dim(model) if model_dim(model) is not None else ndim
    if d is None:
        raise InvalidShapeError("ndim is required for dimension-free models")

    if isinstance(model, IIDField):
        c = model.innovations.variance / (2.0 * math.pi) ** d

        def f_iid(pts: np.ndarray) -> np.ndarray:
            pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
            return np.full(pts.shape[0], c)

        return f_iid

    if isinstance(model, LinearField):
        lags = np.array(model.kernel.lags, dtype=np.float64)
        coefs = np.array([a for _, a in model.kernel.items])
        s2 = model.innovations.variance
        norm = (2.0 * math.pi) ** d

        def f_linear(pts: np.ndarray) -> np.ndarray:
            pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
            amp = np.exp(-1j * pts @ lags.T) @ coefs
            return s2 * np.abs(amp) ** 2 / norm

        return f_linear

    if isinstance(model, GaussianColumnsField):
        phi = model.phi

        def f_cols(pts: np.ndarray) -> np.ndarray:
            pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
            ar = 1.0 / (2.0 * math.pi * (1.0 - 2.0 * phi * np.cos(pts[:, 0]) + phi**2))
            return ar / (2.0 * math.pi)

        return f_cols

    support = covariance_support(model)
    lags = np.array(list(support), dtype=np.float64).reshape(len(support), d)
    gammas = np.array(list(support.values()))
    norm = (2.0 * math.pi) ** d

    def f_volterra(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        vals = np.exp(-1j * pts @ lags.T) @ gammas / norm
        return np.real(vals)

    return f_volterra


def _innovation_to_dict(spec: InnovationSpec) -> dict:
    out = {"distribution": spec.distribution}
    if spec.distribution == "centered_uniform":
        out["half_width"] = spec.half_width
    return out


def model_to_dict(model: FieldModel) -> dict:
    """JSON-ready description of a model (inverse of config parsing)."""
    if isinstance(model, IIDField):
        return {"kind": "iid", "innovation": _innovation_to_dict(model.innovations)}
    if isinstance(model, LinearField):
        return {
            "kind": "linear",
            "innovation": _innovation_to_dict(model.innovations),
            "kernel": [
                {"lag": list(lag), "coeff": a} for lag, a in model.kernel.items
            ],
        }
    if isinstance(model, VolterraField):
        return {
            "kind": "volterra",
            "innovation": _innovation_to_dict(model.innovations),
            "entries": [
                {"u": list(u), "v": list(v), "coeff": a}
                for u, v, a in model.kernel.entries
            ],
        }
    if isinstance(model, GaussianColumnsField):
        return {"kind": "gaussian_columns", "phi": model.phi}
    raise UnsupportedModelError(f"unknown model {type(model).__name__}")


def sample_to_csv(sample: LatticeSample, fileobj: io.TextIOBase) -> None:
    """One row per lattice site: indices in C order, then the value."""
    d = sample.shape.ndim
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow([f"u{i + 1}" for i in range(d)] + ["value"])
    flat = sample.values.reshape(-1)
    for pos, idx in enumerate(np.ndindex(*sample.shape.extents)):
        writer.writerow([x + 1 for x in idx] + [repr(float(flat[pos]))])
