"""Monte Carlo experiments verifying the Fourier-sum limit theorems.

Replicates are independent streams keyed by ``(master_seed, replicate_id)``;
per-replicate statistics land in arrays indexed by replicate id, and every
reduction runs over those arrays in a fixed order.  Reports are therefore pure
functions of the plan, identical for serial and parallel execution.

Tolerances are fixed once here: variance band +-10 percent at the planned
replicate counts, Re/Im correlation band ``4/sqrt(R)``, Kolmogorov-Smirnov
acceptance at alpha = 0.01, and Monte Carlo means compared at 3 standard
errors.  The normalized periodogram ``I_n(t)/f(t)`` is tested against the
unit-mean exponential law, the distribution forced by the limiting variances
of the rotated sum (see README for the normalization note).
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidPlanError,
    NonGenericFrequencyError,
    UnsupportedModelError,
)
from .models import (
    FieldModel,
    IIDField,
    LatticeShape,
    LinearField,
    analytic_spectral_density,
    canonical_halo,
    covariance_range,
    innovation_spec,
    model_dim,
    model_to_dict,
    simulate,
)
from .projection import McEstimate, d0_series
from .rng import LANE_INNOVATIONS, StreamKey, make_stream, sample_innovations
from .spectral import (
    FrequencyPoint,
    TWO_PI,
    rotated_sum,
    spectral_density_partial_sum,
)

SCHEMA_VERSION = 1

CHECK_VARIANCE = "variance"
CHECK_CORRELATION = "correlation"
CHECK_KS_MARGINAL = "ks_marginal"
CHECK_PERIODOGRAM_MEAN = "periodogram_mean"
CHECK_KS_PERIODOGRAM = "ks_periodogram"
ALL_CHECKS = frozenset(
    {
        CHECK_VARIANCE,
        CHECK_CORRELATION,
        CHECK_KS_MARGINAL,
        CHECK_PERIODOGRAM_MEAN,
        CHECK_KS_PERIODOGRAM,
    }
)
_DISTRIBUTIONAL = frozenset({CHECK_KS_MARGINAL, CHECK_KS_PERIODOGRAM})

VARIANCE_BAND = 0.10
CORRELATION_BAND_FACTOR = 4.0
KS_ALPHA = 0.01
MEAN_SE_FACTOR = 3.0
MIN_DISTRIBUTIONAL_REPLICATES = 200


def kolmogorov_sf(x: float) -> float:
    """Survival function of the Kolmogorov distribution.

    Uses the alternating series for large arguments and its theta-transform
    for small ones, where the alternating series converges too slowly.
    """
    if x <= 0.0:
        return 1.0
    if x < 1.0:
        total = 0.0
        for k in range(1, 20):
            total += math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * x * x))
        return 1.0 - math.sqrt(2.0 * math.pi) / x * total
    total = 0.0
    sign = 1.0
    for k in range(1, 200):
        term = sign * math.exp(-2.0 * k * k * x * x)
        total += term
        sign = -sign
        if abs(term) < 1e-16 * max(abs(total), 1e-300):
            break
    return max(0.0, min(1.0, 2.0 * total))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float


def ks_test(samples: Sequence[float], reference_cdf: Callable) -> KsResult:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n < 20:
        raise InsufficientDataError(f"KS test needs >= 20 samples, got {n}")
    try:
        f = np.asarray(reference_cdf(x), dtype=np.float64)
        if f.shape != x.shape:
            raise TypeError
    except TypeError:
        f = np.array([float(reference_cdf(v)) for v in x])
    i = np.arange(1, n + 1, dtype=np.float64)
    d_plus = float(np.max(i / n - f))
    d_minus = float(np.max(f - (i - 1.0) / n))
    d = max(d_plus, d_minus)
    return KsResult(statistic=d, p_value=kolmogorov_sf(math.sqrt(n) * d))


def normal_cdf(mean: float = 0.0, std: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    if std <= 0:
        raise ValueError(f"std must be positive, got {std}")
    erf = np.vectorize(math.erf, otypes=[np.float64])

    def cdf(x):
        z = (np.asarray(x, dtype=np.float64) - mean) / (std * math.sqrt(2.0))
        return 0.5 * (1.0 + erf(z))

    return cdf


def exponential_cdf(mean: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    if mean <= 0:
        raise ValueError(f"mean must be positive, got {mean}")

    def cdf(x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x > 0.0, 1.0 - np.exp(-x / mean), 0.0)

    return cdf


def target_density(model: FieldModel, t) -> float:
    """Spectral density used as the limit target: closed form when available,
    otherwise the complete (finite) covariance series."""
    try:
        return analytic_spectral_density(model, t)
    except UnsupportedModelError:
        return spectral_density_partial_sum(model, t, max(1, covariance_range(model)))


@dataclass(frozen=True)
class ExperimentPlan:
    """A fully deterministic description of one Monte Carlo experiment."""

    model: FieldModel
    frequencies: tuple[FrequencyPoint, ...]
    shapes: tuple[LatticeShape, ...]
    replicates: int
    master_seed: int
    tests: frozenset[str] = ALL_CHECKS
    negative_control: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "frequencies", tuple(self.frequencies))
        object.__setattr__(self, "shapes", tuple(self.shapes))
        object.__setattr__(self, "tests", frozenset(self.tests))
        unknown = self.tests - ALL_CHECKS
        if unknown:
            raise InvalidPlanError(f"unknown checks: {sorted(unknown)}")
        if self.replicates < 2:
            raise InvalidPlanError("plan needs at least 2 replicates")
        if self.tests & _DISTRIBUTIONAL and self.replicates < MIN_DISTRIBUTIONAL_REPLICATES:
            raise InvalidPlanError(
                f"distributional tests need >= {MIN_DISTRIBUTIONAL_REPLICATES} "
                f"replicates, got {self.replicates}"
            )
        for t in self.frequencies:
            if not t.generic:
                raise NonGenericFrequencyError(
                    f"frequency {t.coords} is within {1e-9} of a rational multiple "
                    f"of pi (denominator <= 16); the limit theorems hold only "
                    f"off that null set, so it is refused"
                )
        dims = {s.ndim for s in self.shapes} | {t.ndim for t in self.frequencies}
        if len(dims) > 1:
            raise InvalidPlanError(f"mixed dimensions in plan: {sorted(dims)}")
        want = model_dim(self.model)
        if want is not None and dims and dims != {want}:
            raise InvalidPlanError(f"model dimension {want} does not match plan {dims}")

    def to_dict(self) -> dict:
        return {
            "model": model_to_dict(self.model),
            "frequencies": [list(t.coords) for t in self.frequencies],
            "shapes": [list(s.extents) for s in self.shapes],
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "tests": sorted(self.tests),
            "negative_control": self.negative_control,
        }


@dataclass(frozen=True)
class CltEntry:
    """Aggregated statistics for one (frequency, shape) cell."""

    frequency: tuple[float, ...]
    shape: tuple[int, ...]
    replicates: int
    spectral_density: float
    target_variance: float
    mean_re: float
    mean_im: float
    var_re: float
    var_im: float
    covariance: tuple[tuple[float, float], tuple[float, float]]
    re_im_correlation: float
    periodogram_mean: float
    periodogram_se: float
    ks_re: KsResult | None
    ks_im: KsResult | None
    ks_periodogram: KsResult | None
    degenerate: bool
    verdicts: dict[str, bool | str]
    passed: bool

    def to_dict(self) -> dict:
        def ks(r: KsResult | None):
            return None if r is None else {"statistic": r.statistic, "p_value": r.p_value}

        return {
            "frequency": list(self.frequency),
            "shape": list(self.shape),
            "replicates": self.replicates,
            "spectral_density": self.spectral_density,
            "target_variance": self.target_variance,
            "mean_re": self.mean_re,
            "mean_im": self.mean_im,
            "var_re": self.var_re,
            "var_im": self.var_im,
            "covariance": [list(row) for row in self.covariance],
            "re_im_correlation": self.re_im_correlation,
            "periodogram_mean": self.periodogram_mean,
            "periodogram_se": self.periodogram_se,
            "ks_re": ks(self.ks_re),
            "ks_im": ks(self.ks_im),
            "ks_periodogram": ks(self.ks_periodogram),
            "degenerate": self.degenerate,
            "verdicts": dict(sorted(self.verdicts.items())),
            "passed": self.passed,
        }


@dataclass(frozen=True)
class CltReport:
    plan: ExperimentPlan
    entries: tuple[CltEntry, ...]
    kind: str = "clt"

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "plan": self.plan.to_dict(),
            "results": [e.to_dict() for e in self.entries],
            "passed": self.passed,
        }


def _collect_rotated_sums(
    plan: ExperimentPlan, shape: LatticeShape, workers: int
) -> np.ndarray:
    """(n_frequencies, replicates) rotated sums, written by replicate index."""
    coords = [t.coords for t in plan.frequencies]
    out = np.empty((len(coords), plan.replicates), dtype=np.complex128)

    def run_range(r0: int, r1: int) -> None:
        for r in range(r0, r1):
            key = StreamKey(plan.master_seed, r, LANE_INNOVATIONS)
            sample = simulate(plan.model, shape, key)
            for i, c in enumerate(coords):
                out[i, r] = rotated_sum(sample.values, c)

    if workers <= 1:
        run_range(0, plan.replicates)
    else:
        chunk = math.ceil(plan.replicates / workers)
        bounds = [(r0, min(r0 + chunk, plan.replicates)) for r0 in range(0, plan.replicates, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: run_range(*b), bounds))
    return out


def _build_entry(
    plan: ExperimentPlan, shape: LatticeShape, freq: FrequencyPoint, s_values: np.ndarray
) -> CltEntry:
    d = shape.ndim
    n_sites = shape.n_sites
    r = plan.replicates
    f = target_density(plan.model, freq)
    v_target = 2.0 ** (d - 1) * math.pi**d * f
    v_check = v_target * (2.0 if plan.negative_control else 1.0)

    re = s_values.real / math.sqrt(n_sites)
    im = s_values.imag / math.sqrt(n_sites)
    periodograms = (re * re + im * im) / TWO_PI**d

    degenerate = f <= 0.0 and float(np.max(np.abs(s_values))) == 0.0
    mean_re = float(np.mean(re))
    mean_im = float(np.mean(im))
    cov = np.cov(np.stack([re, im]), ddof=1) if not degenerate else np.zeros((2, 2))
    var_re = float(cov[0, 0])
    var_im = float(cov[1, 1])
    if var_re > 0 and var_im > 0:
        corr = float(cov[0, 1] / math.sqrt(var_re * var_im))
    else:
        corr = 0.0
    per_mean = float(np.mean(periodograms))
    per_se = float(np.std(periodograms, ddof=1)) / math.sqrt(r)

    ks_re = ks_im = ks_per = None
    verdicts: dict[str, bool | str] = {}
    if CHECK_VARIANCE in plan.tests:
        if degenerate:
            verdicts[CHECK_VARIANCE] = "skipped"
        else:
            verdicts[CHECK_VARIANCE] = (
                abs(var_re / v_check - 1.0) <= VARIANCE_BAND
                and abs(var_im / v_check - 1.0) <= VARIANCE_BAND
            )
    if CHECK_CORRELATION in plan.tests:
        if degenerate:
            verdicts[CHECK_CORRELATION] = "skipped"
        else:
            verdicts[CHECK_CORRELATION] = abs(corr) <= CORRELATION_BAND_FACTOR / math.sqrt(r)
    if CHECK_KS_MARGINAL in plan.tests:
        if degenerate:
            verdicts[CHECK_KS_MARGINAL] = "skipped"
        else:
            cdf = normal_cdf(0.0, math.sqrt(v_check))
            ks_re = ks_test(re, cdf)
            ks_im = ks_test(im, cdf)
            verdicts[CHECK_KS_MARGINAL] = min(ks_re.p_value, ks_im.p_value) >= KS_ALPHA
    if CHECK_PERIODOGRAM_MEAN in plan.tests:
        if degenerate:
            verdicts[CHECK_PERIODOGRAM_MEAN] = "skipped"
        else:
            verdicts[CHECK_PERIODOGRAM_MEAN] = (
                abs(per_mean - f) <= MEAN_SE_FACTOR * per_se
            )
    if CHECK_KS_PERIODOGRAM in plan.tests:
        if degenerate:
            verdicts[CHECK_KS_PERIODOGRAM] = "skipped"
        else:
            ks_per = ks_test(periodograms / f, exponential_cdf(1.0))
            verdicts[CHECK_KS_PERIODOGRAM] = ks_per.p_value >= KS_ALPHA
    passed = all(v is True or v == "skipped" for v in verdicts.values())

    return CltEntry(
        frequency=freq.coords,
        shape=shape.extents,
        replicates=r,
        spectral_density=f,
        target_variance=v_target,
        mean_re=mean_re,
        mean_im=mean_im,
        var_re=var_re,
        var_im=var_im,
        covariance=((var_re, float(cov[0, 1])), (float(cov[1, 0]), var_im)),
        re_im_correlation=corr,
        periodogram_mean=per_mean,
        periodogram_se=per_se,
        ks_re=ks_re,
        ks_im=ks_im,
        ks_periodogram=ks_per,
        degenerate=degenerate,
        verdicts=verdicts,
        passed=passed,
    )


def run_clt_experiment(plan: ExperimentPlan, workers: int = 1) -> CltReport:
    """Simulate the plan and aggregate the limit-theorem statistics."""
    entries: list[CltEntry] = []
    for shape in plan.shapes:
        s_values = _collect_rotated_sums(plan, shape, workers)
        for i, freq in enumerate(plan.frequencies):
            entries.append(_build_entry(plan, shape, freq, s_values[i]))
    return CltReport(plan=plan, entries=tuple(entries))


def run_periodogram_experiment(plan: ExperimentPlan, workers: int = 1) -> CltReport:
    """Periodogram-only variant: mean level and the unit-mean exponential law."""
    wanted = plan.tests & {CHECK_PERIODOGRAM_MEAN, CHECK_KS_PERIODOGRAM}
    sub = ExperimentPlan(
        model=plan.model,
        frequencies=plan.frequencies,
        shapes=plan.shapes,
        replicates=plan.replicates,
        master_seed=plan.master_seed,
        tests=wanted or {CHECK_PERIODOGRAM_MEAN, CHECK_KS_PERIODOGRAM},
        negative_control=plan.negative_control,
    )
    report = run_clt_experiment(sub, workers=workers)
    return CltReport(plan=sub, entries=report.entries, kind="periodogram")


def lln_rotated_average(
    model: FieldModel,
    t,
    n1_ladder: Sequence[int],
    n2: int,
    replicates: int = 400,
    key: StreamKey = StreamKey(0),
    rotated: bool = True,
) -> list[McEstimate]:
    """Estimates of ``E | n1^{-1} sum_j w_j Y_{n2,j} |`` along the ladder.

    ``Y_{n2,j}`` is the column-normalized rotated sum of the martingale
    differences, ``n2^{-1/2} sum_k exp(i k t2) D_{j,k}(t)``; the weights are
    ``w_j = exp(i j t1)`` (rotated) or 1 (plain ergodic average).
    """
    if not isinstance(model, (IIDField, LinearField)):
        raise UnsupportedModelError(
            f"rotated-average experiment supports IID and Linear models, "
            f"not {type(model).__name__}"
        )
    point = t if isinstance(t, FrequencyPoint) else FrequencyPoint(tuple(float(c) for c in t))
    if point.ndim != 2:
        raise InvalidPlanError("the rotated-average experiment is two-dimensional")
    if not point.generic:
        raise NonGenericFrequencyError(
            f"frequency {point.coords} is refused: the averaging law holds for "
            f"almost all t only"
        )
    replicates = int(replicates)
    if replicates < 2:
        raise InvalidPlanError("need at least 2 replicates")
    series = d0_series(model, point)
    t1, t2 = point.coords
    stream = make_stream(key)
    out: list[McEstimate] = []
    for n1 in n1_ladder:
        shape = LatticeShape((int(n1), int(n2)))
        column_phase = np.exp(1j * t2 * np.arange(1, n2 + 1))
        row_weights = (
            np.exp(1j * t1 * np.arange(1, int(n1) + 1)) if rotated else np.ones(int(n1))
        )
        vals = np.empty(replicates, dtype=np.float64)
        halo = canonical_halo(model)
        spec = innovation_spec(model)
        for r in range(replicates):
            innovations = sample_innovations(stream, spec, shape, halo=halo)
            d_field = series.evaluate_field(innovations, shape)
            y = (d_field @ column_phase) / math.sqrt(n2)
            avg = (row_weights @ y) / float(n1)
            vals[r] = abs(avg)
        out.append(
            McEstimate(
                float(np.mean(vals)),
                float(np.std(vals, ddof=1)) / math.sqrt(replicates),
                replicates,
            )
        )
    return out


def report_to_csv_rows(report: CltReport) -> list[list]:
    """Flatten a report into plot-ready CSV rows (header first)."""
    header = [
        "shape",
        "frequency",
        "replicates",
        "spectral_density",
        "target_variance",
        "var_re",
        "var_im",
        "re_im_correlation",
        "periodogram_mean",
        "periodogram_se",
        "passed",
    ]
    rows: list[list] = [header]
    for e in report.entries:
        rows.append(
            [
                "x".join(str(n) for n in e.shape),
                " ".join(repr(c) for c in e.frequency),
                e.replicates,
                repr(e.spectral_density),
                repr(e.target_variance),
                repr(e.var_re),
                repr(e.var_im),
                repr(e.re_im_correlation),
                repr(e.periodogram_mean),
                repr(e.periodogram_se),
                int(e.passed),
            ]
        )
    return rows


def write_report(
    report: CltReport,
    path,
    timestamp: bool = False,
    csv_path=None,
) -> None:
    """Serialize a report to JSON (and optionally CSV).

    With ``timestamp=False`` the output is byte-identical across runs of the
    same plan.
    """
    doc = report.to_dict()
    if timestamp:
        doc["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerows(report_to_csv_rows(report))
