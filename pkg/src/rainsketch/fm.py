"""Probabilistic distinct-count sketches built on trailing-zero hashing.

An FMSketch is a fixed-width bit vector: inserting a client id sets the
bit chosen by the seeded position hash, so bit k is set with probability
2^-(k+1). The count of distinct ids inserted is estimated from the
lowest still-unset bit as 2^lsb0 / 0.77351. Averaging the lsb0 index
across several independently seeded sketches (an ensemble) before
exponentiating tightens the estimate.

Sketch state depends only on the SET of ids inserted: inserts are
idempotent and commutative, and merging two sketches gives exactly the
sketch of the union of their input sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .hashing import derive_seeds, digest64, mix64, position_of

# Bias correction for the trailing-zero estimator: E[lsb0] ~ log2(0.77351 n).
FM_CORRECTION = 0.77351


class SketchMismatchError(ValueError):
    """Merge attempted between sketches with different width or seeds."""


@dataclass(frozen=True)
class AccuracyParams:
    """Target accuracy for an ensemble estimate.

    The estimate is within epsilon * N of the truth with probability at
    least 1 - delta, given enough sketch rows; constant_c scales the row
    count formula and defaults to 1 (calibrate empirically if needed).
    """

    epsilon: float
    delta: float
    constant_c: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.constant_c <= 0.0:
            raise ValueError(f"constant_c must be positive, got {self.constant_c}")


def required_sketch_count(params: AccuracyParams) -> int:
    """Number of ensemble rows needed for the target accuracy.

    ceil(c * ln(2/delta) / epsilon^2), at least 1.
    """
    raw = params.constant_c * math.log(2.0 / params.delta) / (params.epsilon**2)
    return max(1, math.ceil(raw))


def estimate_from_lsb0(mean_lsb0: float) -> float:
    """Distinct-count estimate from an (averaged) lsb0 index."""
    return 2.0**mean_lsb0 / FM_CORRECTION


class FMSketch:
    """One bit-vector sketch of ``width`` bits.

    Bits are stored in a Python int, bit k = position k, so the sketch
    works for any width. A bit, once set, stays set until reset().
    """

    __slots__ = ("width", "bits")

    def __init__(self, width: int = 64, bits: int = 0):
        if width < 1:
            raise ValueError("width must be >= 1")
        if bits < 0 or bits >> width:
            raise ValueError("bits outside sketch width")
        self.width = width
        self.bits = bits

    def insert(self, client_id: bytes | str, seed: int) -> None:
        """Set the bit this client id maps to under ``seed``."""
        self.bits |= 1 << position_of(client_id, seed, self.width)

    @property
    def is_empty(self) -> bool:
        return self.bits == 0

    def lsb0(self) -> int:
        """Index of the lowest 0 bit; ``width`` when all bits are set."""
        unset = ~self.bits & ((1 << self.width) - 1)
        if unset == 0:
            return self.width
        return (unset & -unset).bit_length() - 1

    def estimate(self) -> float:
        """Estimated distinct insert count; exactly 0 for an empty sketch.

        The raw formula would report 2^0 / 0.77351 for an empty sketch,
        so the all-zero state is special-cased to 0.
        """
        if self.bits == 0:
            return 0.0
        return estimate_from_lsb0(self.lsb0())

    def merge(self, other: FMSketch) -> FMSketch:
        """Union of two sketches over the same width (new sketch)."""
        if self.width != other.width:
            raise SketchMismatchError(
                f"cannot merge widths {self.width} and {other.width}"
            )
        return FMSketch(self.width, self.bits | other.bits)

    def reset(self) -> None:
        self.bits = 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, FMSketch):
            return NotImplemented
        return self.width == other.width and self.bits == other.bits

    def __hash__(self):
        return hash((self.width, self.bits))

    def __repr__(self) -> str:
        return f"FMSketch(width={self.width}, bits={self.bits:#x})"


class FMEnsemble:
    """K independently seeded FMSketch rows sharing one width.

    Every insert updates all rows; the estimate exponentiates the mean
    lsb0 index across rows (or, with average="estimate", averages the
    per-row estimates instead).
    """

    __slots__ = ("width", "seeds", "rows", "_mixed")

    def __init__(
        self,
        sketches: int | None = None,
        width: int = 64,
        seed: int = 0,
        *,
        seeds: list[int] | None = None,
    ):
        if seeds is None:
            if sketches is None:
                raise ValueError("give either a sketch count or explicit seeds")
            seeds = derive_seeds(sketches, seed)
        elif sketches is not None and sketches != len(seeds):
            raise ValueError("sketch count disagrees with explicit seeds")
        if len(seeds) < 1:
            raise ValueError("an ensemble needs at least one row")
        if len(set(seeds)) != len(seeds):
            raise ValueError("row seeds must be pairwise distinct")
        self.width = width
        self.seeds = list(seeds)
        self.rows = [FMSketch(width) for _ in seeds]
        self._mixed = np.array([mix64(s) for s in self.seeds], dtype=np.uint64)

    @classmethod
    def from_state(cls, seeds: list[int], bits: list[int], width: int) -> FMEnsemble:
        """Rebuild an ensemble from serialized row state."""
        ens = cls(width=width, seeds=seeds)
        if len(bits) != len(seeds):
            raise ValueError("one bit vector per seed required")
        ens.rows = [FMSketch(width, b) for b in bits]
        return ens

    @property
    def sketch_count(self) -> int:
        return len(self.rows)

    def insert(self, client_id: bytes | str) -> None:
        """Insert one client id into every row."""
        positions = np.empty(len(self.rows), dtype=np.int64)
        kernels.positions_into(digest64(client_id), self._mixed, self.width, positions)
        for row, p in zip(self.rows, positions):
            row.bits |= 1 << int(p)

    def insert_many(self, client_ids) -> None:
        """Bulk insert; uses the wide kernel path when width <= 64."""
        ids = list(client_ids)
        if not ids:
            return
        if self.width > 64:
            for cid in ids:
                self.insert(cid)
            return
        digests = np.empty(len(ids), dtype=np.uint64)
        kernels.digest_many(ids, digests)
        masks = np.array([row.bits for row in self.rows], dtype=np.uint64)
        kernels.fm_or_bulk(digests, self._mixed, self.width, masks)
        for row, m in zip(self.rows, masks):
            row.bits = int(m)

    def lsb0s(self) -> list[int]:
        """Per-row lsb0 profile."""
        return [row.lsb0() for row in self.rows]

    @property
    def is_empty(self) -> bool:
        return all(row.is_empty for row in self.rows)

    def estimate(self, average: str = "index") -> float:
        """Ensemble distinct-count estimate; 0 when every row is empty.

        average="index" exponentiates the mean lsb0 (the default);
        average="estimate" returns the mean of the per-row estimates.
        """
        if self.is_empty:
            return 0.0
        if average == "index":
            total = sum(row.lsb0() for row in self.rows)
            return estimate_from_lsb0(total / len(self.rows))
        if average == "estimate":
            return sum(row.estimate() for row in self.rows) / len(self.rows)
        raise ValueError(f"unknown averaging mode {average!r}")

    def merge(self, other: FMEnsemble) -> FMEnsemble:
        """Row-wise union with an ensemble of identical width and seeds."""
        if self.width != other.width or self.seeds != other.seeds:
            raise SketchMismatchError("ensembles differ in width or seeds")
        return FMEnsemble.from_state(
            self.seeds,
            [a.bits | b.bits for a, b in zip(self.rows, other.rows)],
            self.width,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FMEnsemble):
            return NotImplemented
        return (
            self.width == other.width
            and self.seeds == other.seeds
            and self.rows == other.rows
        )

    def __repr__(self) -> str:
        return f"FMEnsemble(sketches={len(self.rows)}, width={self.width})"
