"""Deterministic random streams and i.i.d. innovation sampling.

Every stream is a Philox counter-based generator whose 256-bit key pool is
derived by hashing the ``(master_seed, replicate_id, lane)`` triple through
``numpy.random.SeedSequence``.  The construction is frozen on purpose:

* Philox is counter-based, so a stream never shares mutable state with any
  other stream and is identical for serial and parallel schedules;
* ``SeedSequence`` hashing is a fixed, platform-independent algorithm, so
  distinct key triples give statistically independent streams while equal
  triples reproduce the same draws bit for bit;
* normal variates use numpy's ziggurat ``standard_normal``, uniform variates
  the 53-bit ``uniform`` path.  These algorithm choices are part of the
  reproducibility contract and must not be swapped silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidShapeError, MissingInnovationError

RandomStream = np.random.Generator

_U64 = 1 << 64
_U32 = 1 << 32

#: Lane carrying the innovations that drive a field simulation.
LANE_INNOVATIONS = 0
#: Lane reserved for auxiliary noise (never mixed with innovations).
LANE_AUX = 1


@dataclass(frozen=True)
class StreamKey:
    """Address of one reproducible random stream.

    Distinct ``(master_seed, replicate_id, lane)`` triples address independent
    streams; equal triples address the identical stream regardless of process,
    thread, or call order.
    """

    master_seed: int
    replicate_id: int = 0
    lane: int = LANE_INNOVATIONS

    def __post_init__(self) -> None:
        if not 0 <= int(self.master_seed) < _U64:
            raise ValueError(f"master_seed out of u64 range: {self.master_seed}")
        if not 0 <= int(self.replicate_id) < _U64:
            raise ValueError(f"replicate_id out of u64 range: {self.replicate_id}")
        if not 0 <= int(self.lane) < _U32:
            raise ValueError(f"lane out of u32 range: {self.lane}")

    def with_replicate(self, replicate_id: int) -> "StreamKey":
        return StreamKey(self.master_seed, replicate_id, self.lane)

    def with_lane(self, lane: int) -> "StreamKey":
        return StreamKey(self.master_seed, self.replicate_id, lane)


def make_stream(key: StreamKey) -> RandomStream:
    """Create the generator addressed by ``key``.

    The output sequence is a pure function of the key.
    """
    seed = np.random.SeedSequence([int(key.master_seed), int(key.replicate_id), int(key.lane)])
    return np.random.Generator(np.random.Philox(seed))


#: Marginal laws available for the innovation field.
DISTRIBUTIONS = ("standard_normal", "rademacher", "centered_uniform")


@dataclass(frozen=True)
class InnovationSpec:
    """Marginal law of the i.i.d. innovation field (mean exactly 0).

    ``half_width`` is only meaningful for ``centered_uniform``, which is
    uniform on ``[-half_width, half_width]`` with variance ``half_width**2/3``.
    """

    distribution: str = "standard_normal"
    half_width: float = 1.0

    def __post_init__(self) -> None:
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(
                f"unknown innovation distribution {self.distribution!r}; "
                f"expected one of {DISTRIBUTIONS}"
            )
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise ValueError(f"half_width must be a positive real, got {self.half_width}")

    @property
    def variance(self) -> float:
        if self.distribution == "centered_uniform":
            return self.half_width**2 / 3.0
        return 1.0

    @classmethod
    def standard_normal(cls) -> "InnovationSpec":
        return cls("standard_normal")

    @classmethod
    def rademacher(cls) -> "InnovationSpec":
        return cls("rademacher")

    @classmethod
    def centered_uniform(cls, half_width: float) -> "InnovationSpec":
        return cls("centered_uniform", half_width=half_width)


@dataclass(frozen=True)
class InnovationLattice:
    """I.i.d. draws indexed over an integer box ``lo <= u <= hi``.

    ``values[0, ..., 0]`` sits at lattice index ``lo``; the box is the
    simulation grid ``1 <= u <= n`` extended by the sampling halo.
    """

    values: np.ndarray
    lo: tuple[int, ...]
    spec: InnovationSpec

    @property
    def hi(self) -> tuple[int, ...]:
        return tuple(l + s - 1 for l, s in zip(self.lo, self.values.shape))

    def block(self, lo: Sequence[int], hi: Sequence[int]) -> np.ndarray:
        """View of the inclusive index box ``lo..hi``."""
        lo = tuple(int(x) for x in lo)
        hi = tuple(int(x) for x in hi)
        if len(lo) != len(self.lo) or len(hi) != len(self.lo):
            raise MissingInnovationError(f"window dimension mismatch: {lo}..{hi}")
        if any(a < l or b > h for a, b, l, h in zip(lo, hi, self.lo, self.hi)):
            raise MissingInnovationError(
                f"innovation window {self.lo}..{self.hi} does not cover {lo}..{hi}"
            )
        idx = tuple(slice(a - l, b - l + 1) for a, b, l in zip(lo, hi, self.lo))
        return self.values[idx]

    def at(self, index: Sequence[int]) -> float:
        """Single innovation at a lattice index."""
        index = tuple(int(x) for x in index)
        return float(self.block(index, index).reshape(()))


def _draw(stream: RandomStream, spec: InnovationSpec, size: tuple[int, ...]) -> np.ndarray:
    if spec.distribution == "standard_normal":
        return stream.standard_normal(size)
    if spec.distribution == "rademacher":
        return 2.0 * stream.integers(0, 2, size=size).astype(np.float64) - 1.0
    return stream.uniform(-spec.half_width, spec.half_width, size=size)


def _normalize_halo(halo: int | Sequence[int], ndim: int) -> tuple[int, ...]:
    if isinstance(halo, (int, np.integer)):
        halo = (int(halo),) * ndim
    else:
        halo = tuple(int(h) for h in halo)
    if len(halo) != ndim:
        raise InvalidShapeError(f"halo {halo} does not match dimension {ndim}")
    if any(h < 0 for h in halo):
        raise InvalidShapeError(f"halo must be non-negative per axis, got {halo}")
    return halo


def sample_innovations(
    stream: RandomStream,
    spec: InnovationSpec,
    shape,
    halo: int | Sequence[int] = 0,
) -> InnovationLattice:
    """Draw i.i.d. innovations over the grid ``1 <= u <= n`` extended by ``halo``.

    ``shape`` is a :class:`~fieldspectra.models.LatticeShape` or a sequence of
    positive extents.  Draws are made in one vectorized call in C order over
    the extended box, so the result is a pure function of
    ``(stream key, spec, shape, halo)``.
    """
    extents = tuple(int(n) for n in getattr(shape, "extents", shape))
    if not extents or any(n < 1 for n in extents):
        raise InvalidShapeError(f"extents must be positive, got {extents}")
    halo = _normalize_halo(halo, len(extents))
    lo = tuple(1 - h for h in halo)
    size = tuple(n + 2 * h for n, h in zip(extents, halo))
    values = _draw(stream, spec, size)
    return InnovationLattice(values=values, lo=lo, spec=spec)
