"""Run configuration: TOML (primary) or JSON, parsed strictly.

Unknown keys are errors, not warnings, and every diagnostic names the key
path.  Frequencies are decimal literals only; there is no expression parsing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ConfigError, FieldSpectraError
from .harness import ALL_CHECKS, ExperimentPlan
from .models import (
    CoefficientKernel,
    FieldModel,
    GaussianColumnsField,
    IIDField,
    LatticeShape,
    LinearField,
    VolterraField,
    VolterraKernel,
)
from .rng import InnovationSpec
from .spectral import FrequencyPoint


def load_config(path) -> dict:
    """Read a TOML or JSON config file into a plain dict."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    suffix = path.suffix.lower()
    if suffix == ".toml":
        try:
            return tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: TOML parse error: {exc}") from exc
    if suffix == ".json":
        try:
            return json.loads(raw.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    raise ConfigError(f"{path}: unsupported config format {suffix!r} (use .toml or .json)")


def _require_table(cfg: Mapping, key: str, where: str) -> Mapping:
    if key not in cfg:
        raise ConfigError(f"{where}: missing required section [{key}]")
    value = cfg[key]
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where}.{key}: expected a table/object")
    return value

def _check_keys(section: Mapping, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}; allowed {sorted(allowed)}")


_MISSING = object()


def _get(section: Mapping, key: str, where: str, default=_MISSING):
    if key not in section:
        if default is _MISSING:
            raise ConfigError(f"{where}.{key}: required key is missing")
        return default
    return section[key]


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _int_list(value, where: str) -> list[int]:
    if not isinstance(value, Sequence) or isinstance(value, (str, bytes)):
        raise ConfigError(f"{where}: expected an array of integers, got {value!r}")
    return [_int(v, f"{where}[{i}]") for i, v in enumerate(value)]


def parse_innovation(section: Any, where: str) -> InnovationSpec:
    if isinstance(section, str):
        section = {"distribution": section}
    if not isinstance(section, Mapping):
        raise ConfigError(f"{where}: expected a distribution name or table")
    _check_keys(section, {"distribution", "half_width"}, where)
    name = _get(section, "distribution", where)
    if not isinstance(name, str):
        raise ConfigError(f"{where}.distribution: expected a string")
    half_width = _float(_get(section, "half_width", where, 1.0), f"{where}.half_width")
    try:
        return InnovationSpec(name, half_width=half_width)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_model(section: Mapping, where: str = "model") -> FieldModel:
    if not isinstance(section, Mapping):
        raise ConfigError(f"{where}: expected a table")
    kind = _get(section, "kind", where)
    if kind == "iid":
        _check_keys(section, {"kind", "innovation"}, where)
        innov = parse_innovation(
            _get(section, "innovation", where, "standard_normal"), f"{where}.innovation"
        )
        return IIDField(innovations=innov)
    if kind == "linear":
        _check_keys(section, {"kind", "innovation", "kernel"}, where)
        innov = parse_innovation(
            _get(section, "innovation", where, "standard_normal"), f"{where}.innovation"
        )
        entries = _get(section, "kernel", where)
        if not isinstance(entries, Sequence) or not entries:
            raise ConfigError(f"{where}.kernel: expected a non-empty array of tables")
        coeffs = {}
        for i, item in enumerate(entries):
            w = f"{where}.kernel[{i}]"
            if not isinstance(item, Mapping):
                raise ConfigError(f"{w}: expected a table with 'lag' and 'coeff'")
            _check_keys(item, {"lag", "coeff"}, w)
            lag = tuple(_int_list(_get(item, "lag", w), f"{w}.lag"))
            if lag in coeffs:
                raise ConfigError(f"{w}: duplicate lag {list(lag)}")
            coeffs[lag] = _float(_get(item, "coeff", w), f"{w}.coeff")
        try:
            kernel = CoefficientKernel(coeffs)
        except FieldSpectraError as exc:
            raise ConfigError(f"{where}.kernel: {exc}") from exc
        return LinearField(kernel=kernel, innovations=innov)
    if kind == "volterra":
        _check_keys(section, {"kind", "innovation", "entries"}, where)
        innov = parse_innovation(
            _get(section, "innovation", where, "standard_normal"), f"{where}.innovation"
        )
        raw = _get(section, "entries", where)
        if not isinstance(raw, Sequence) or not raw:
            raise ConfigError(f"{where}.entries: expected a non-empty array of tables")
        entries = []
        for i, item in enumerate(raw):
            w = f"{where}.entries[{i}]"
            if not isinstance(item, Mapping):
                raise ConfigError(f"{w}: expected a table with 'u', 'v', 'coeff'")
            _check_keys(item, {"u", "v", "coeff"}, w)
            entries.append(
                (
                    tuple(_int_list(_get(item, "u", w), f"{w}.u")),
                    tuple(_int_list(_get(item, "v", w), f"{w}.v")),
                    _float(_get(item, "coeff", w), f"{w}.coeff"),
                )
            )
        try:
            kernel = VolterraKernel(entries)
        except FieldSpectraError as exc:
            raise ConfigError(f"{where}.entries: {exc}") from exc
        return VolterraField(kernel=kernel, innovations=innov)
    if kind == "gaussian_columns":
        _check_keys(section, {"kind", "phi"}, where)
        phi = _float(_get(section, "phi", where), f"{where}.phi")
        try:
            return GaussianColumnsField(phi=phi)
        except ValueError as exc:
            raise ConfigError(f"{where}.phi: {exc}") from exc
    raise ConfigError(
        f"{where}.kind: unknown model kind {kind!r}; expected one of "
        f"['iid', 'linear', 'volterra', 'gaussian_columns']"
    )


def parse_frequency(value, where: str) -> FrequencyPoint:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    coords = value
    if not isinstance(coords, Sequence):
        raise ConfigError(f"{where}: expected a frequency (array of decimals)")
    try:
        return FrequencyPoint([_float(c, f"{where}[{i}]") for i, c in enumerate(coords)])
    except FieldSpectraError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_shape(value, where: str) -> LatticeShape:
    try:
        return LatticeShape(_int_list(value, where))
    except FieldSpectraError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_experiment(cfg: Mapping, model: FieldModel, where: str = "experiment") -> ExperimentPlan:
    _check_keys(
        cfg,
        {"frequencies", "shapes", "replicates", "master_seed", "tests", "negative_control"},
        where,
    )
    freqs = _get(cfg, "frequencies", where)
    if not isinstance(freqs, Sequence):
        raise ConfigError(f"{where}.frequencies: expected an array")
    frequencies = tuple(
        parse_frequency(f, f"{where}.frequencies[{i}]") for i, f in enumerate(freqs)
    )
    shapes_raw = _get(cfg, "shapes", where)
    if not isinstance(shapes_raw, Sequence):
        raise ConfigError(f"{where}.shapes: expected an array")
    shapes = tuple(parse_shape(s, f"{where}.shapes[{i}]") for i, s in enumerate(shapes_raw))
    replicates = _int(_get(cfg, "replicates", where), f"{where}.replicates")
    master_seed = _int(_get(cfg, "master_seed", where), f"{where}.master_seed")
    tests = _get(cfg, "tests", where, sorted(ALL_CHECKS))
    if not isinstance(tests, Sequence) or isinstance(tests, str):
        raise ConfigError(f"{where}.tests: expected an array of check names")
    negative_control = _get(cfg, "negative_control", where, False)
    if not isinstance(negative_control, bool):
        raise ConfigError(f"{where}.negative_control: expected a boolean")
    try:
        return ExperimentPlan(
            model=model,
            frequencies=frequencies,
            shapes=shapes,
            replicates=replicates,
            master_seed=master_seed,
            tests=frozenset(tests),
            negative_control=negative_control,
        )
    except FieldSpectraError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class OutputConfig:
    path: str | None = None
    csv_path: str | None = None
    timestamp: bool = False


def parse_output(cfg: Mapping | None, where: str = "output") -> OutputConfig:
    if cfg is None:
        return OutputConfig()
    _check_keys(cfg, {"path", "csv_path", "timestamp"}, where)
    path = _get(cfg, "path", where, None)
    csv_path = _get(cfg, "csv_path", where, None)
    timestamp = _get(cfg, "timestamp", where, False)
    if path is not None and not isinstance(path, str):
        raise ConfigError(f"{where}.path: expected a string")
    if csv_path is not None and not isinstance(csv_path, str):
        raise ConfigError(f"{where}.csv_path: expected a string")
    if not isinstance(timestamp, bool):
        raise ConfigError(f"{where}.timestamp: expected a boolean")
    return OutputConfig(path=path, csv_path=csv_path, timestamp=timestamp)


@dataclass(frozen=True)
class SimulateConfig:
    shape: LatticeShape
    master_seed: int
    replicate_id: int = 0


def parse_simulate(cfg: Mapping, where: str = "simulate") -> SimulateConfig:
    _check_keys(cfg, {"shape", "master_seed", "replicate_id"}, where)
    return SimulateConfig(
        shape=parse_shape(_get(cfg, "shape", where), f"{where}.shape"),
        master_seed=_int(_get(cfg, "master_seed", where), f"{where}.master_seed"),
        replicate_id=_int(_get(cfg, "replicate_id", where, 0), f"{where}.replicate_id"),
    )


@dataclass(frozen=True)
class SpectrumConfig:
    grid: tuple[int, ...]
    partial_sum_radius: int
    fejer_shape: LatticeShape
    quadrature_resolution: int | None = None


def parse_spectrum(cfg: Mapping, where: str = "spectrum") -> SpectrumConfig:
    _check_keys(
        cfg, {"grid", "partial_sum_radius", "fejer_shape", "quadrature_resolution"}, where
    )
    grid = tuple(_int_list(_get(cfg, "grid", where), f"{where}.grid"))
    if any(g < 1 for g in grid):
        raise ConfigError(f"{where}.grid: extents must be >= 1, got {list(grid)}")
    radius = _int(_get(cfg, "partial_sum_radius", where), f"{where}.partial_sum_radius")
    fejer_shape = parse_shape(_get(cfg, "fejer_shape", where), f"{where}.fejer_shape")
    resolution = _get(cfg, "quadrature_resolution", where, None)
    if resolution is not None:
        resolution = _int(resolution, f"{where}.quadrature_resolution")
    return SpectrumConfig(
        grid=grid,
        partial_sum_radius=radius,
        fejer_shape=fejer_shape,
        quadrature_resolution=resolution,
    )


@dataclass(frozen=True)
class MartingaleConfig:
    shapes: tuple[LatticeShape, ...]
    frequency: FrequencyPoint
    replicates: int
    master_seed: int
    truncation: int | None = None


def parse_martingale(cfg: Mapping, where: str = "martingale") -> MartingaleConfig:
    _check_keys(
        cfg, {"shapes", "frequency", "replicates", "master_seed", "truncation"}, where
    )
    shapes_raw = _get(cfg, "shapes", where)
    if not isinstance(shapes_raw, Sequence):
        raise ConfigError(f"{where}.shapes: expected an array")
    truncation = _get(cfg, "truncation", where, None)
    if truncation is not None:
        truncation = _int(truncation, f"{where}.truncation")
    return MartingaleConfig(
        shapes=tuple(parse_shape(s, f"{where}.shapes[{i}]") for i, s in enumerate(shapes_raw)),
        frequency=parse_frequency(_get(cfg, "frequency", where), f"{where}.frequency"),
        replicates=_int(_get(cfg, "replicates", where), f"{where}.replicates"),
        master_seed=_int(_get(cfg, "master_seed", where), f"{where}.master_seed"),
        truncation=truncation,
    )


@dataclass(frozen=True)
class LlnConfig:
    n1_ladder: tuple[int, ...]
    n2: int
    frequency: FrequencyPoint
    replicates: int
    master_seed: int
    rotated: bool = True


def parse_lln(cfg: Mapping, where: str = "lln") -> LlnConfig:
    _check_keys(
        cfg, {"n1_ladder", "n2", "frequency", "replicates", "master_seed", "rotated"}, where
    )
    rotated = _get(cfg, "rotated", where, True)
    if not isinstance(rotated, bool):
        raise ConfigError(f"{where}.rotated: expected a boolean")
    return LlnConfig(
        n1_ladder=tuple(_int_list(_get(cfg, "n1_ladder", where), f"{where}.n1_ladder")),
        n2=_int(_get(cfg, "n2", where), f"{where}.n2"),
        frequency=parse_frequency(_get(cfg, "frequency", where), f"{where}.frequency"),
        replicates=_int(_get(cfg, "replicates", where), f"{where}.replicates"),
        master_seed=_int(_get(cfg, "master_seed", where), f"{where}.master_seed"),
        rotated=rotated,
    )


TOP_LEVEL_SECTIONS = {"model", "experiment", "spectrum", "martingale", "lln", "simulate", "output"}


def validate_top_level(cfg: Mapping, where: str = "config") -> None:
    if not isinstance(cfg, Mapping):
        raise ConfigError(f"{where}: expected a table at the top level")
    _check_keys(cfg, TOP_LEVEL_SECTIONS, where)
