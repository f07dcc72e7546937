"""Finite probability primitives: vectors, channels and joint tables.

All types are immutable after validation (the backing arrays are frozen), so
instances can be shared freely across threads. Validation is strict:
distributions must sum to one within ``SUM_TOL``, and entries may dip below
zero only by ``NEGATIVE_CLAMP`` (double-precision accumulation noise), in
which case they are clamped to exactly zero.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass
from typing import Sequence

import numpy as np

from .errors import SingularMatrixError, ValidationError

#: Tolerance on |sum - 1| for a valid distribution.
SUM_TOL = 1e-12
#: Entries in [-NEGATIVE_CLAMP, 0) are treated as accumulation noise.
NEGATIVE_CLAMP = 1e-14
#: Default smallest singular value below which a square channel is
#: considered non-invertible.
INVERTIBILITY_TOL = 1e-9


def _clean_array(values, name: str, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    if arr.min() < -NEGATIVE_CLAMP:
        raise ValidationError(
            f"{name} has a negative entry ({arr.min():.3e} < -{NEGATIVE_CLAMP:.0e})"
        )
    np.clip(arr, 0.0, None, out=arr)
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ProbVector:
    """A probability distribution on a finite alphabet.

    Parameters
    ----------
    entries : array-like of float
        Non-negative values summing to one within ``SUM_TOL``.
    labels : sequence of str, optional
        Symbol names, one per index.
    strictly_positive : bool
        When True, reject any zero entry (needed wherever the math divides
        by the distribution).
    """

    entries: np.ndarray
    labels: tuple[str, ...] | None = None
    strictly_positive: InitVar[bool] = False

    def __post_init__(self, strictly_positive: bool) -> None:
        arr = _clean_array(self.entries, "probability vector", ndim=1)
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError(
                f"probability vector sums to {total!r}, not 1 within {SUM_TOL:.0e}"
            )
        object.__setattr__(self, "entries", _freeze(arr))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != arr.size:
                raise ValidationError(
                    f"{len(labels)} labels for {arr.size} entries"
                )
            object.__setattr__(self, "labels", labels)
        if strictly_positive:
            self.require_strictly_positive()

    @property
    def dimension(self) -> int:
        return int(self.entries.size)

    def __len__(self) -> int:
        return self.dimension

    def __getitem__(self, idx: int) -> float:
        return float(self.entries[idx])

    @property
    def is_strictly_positive(self) -> bool:
        return bool(self.entries.min() > 0.0)

    def require_strictly_positive(self) -> "ProbVector":
        if not self.is_strictly_positive:
            idx = int(np.argmin(self.entries))
            raise ValidationError(
                f"probability vector has a zero entry at index {idx}; "
                "a strictly positive distribution is required here"
            )
        return self

    def sqrt(self) -> np.ndarray:
        """Entrywise square root as a plain (writable) array."""
        return np.sqrt(self.entries)


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """A column-stochastic conditional distribution matrix.

    Rows index output symbols, columns index input symbols; column ``j`` is
    the output distribution given input ``j``.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = _clean_array(self.entries, "channel matrix", ndim=2)
        sums = arr.sum(axis=0)
        bad = np.abs(sums - 1.0) > SUM_TOL
        if bad.any():
            j = int(np.argmax(bad))
            raise ValidationError(
                f"channel matrix column {j} sums to {sums[j]!r}, not 1 within {SUM_TOL:.0e}"
            )
        object.__setattr__(self, "entries", _freeze(arr))

    @property
    def n_outputs(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n_inputs(self) -> int:
        return int(self.entries.shape[1])

    @property
    def is_square(self) -> bool:
        return self.n_outputs == self.n_inputs

    def column(self, j: int) -> ProbVector:
        return ProbVector(self.entries[:, j])

    def apply(self, dist: ProbVector | np.ndarray) -> np.ndarray:
        """Push an input distribution through the channel (matrix-vector product)."""
        vec = dist.entries if isinstance(dist, ProbVector) else np.asarray(dist, dtype=float)
        if vec.shape != (self.n_inputs,):
            raise ValidationError(
                f"channel expects an input vector of length {self.n_inputs}, got {vec.shape}"
            )
        return self.entries @ vec

    def min_singular_value(self) -> float:
        return float(np.linalg.svd(self.entries, compute_uv=False).min())

    def require_invertible(self, threshold: float = INVERTIBILITY_TOL) -> "ChannelMatrix":
        """Check square shape and conditioning for use as a leakage matrix."""
        if not self.is_square:
            raise ValidationError(
                f"leakage matrix must be square, got {self.n_outputs}x{self.n_inputs}"
            )
        smin = self.min_singular_value()
        if smin <= threshold:
            raise SingularMatrixError(
                f"matrix is numerically singular: smallest singular value "
                f"{smin:.3e} <= threshold {threshold:.0e}"
            )
        return self

    def inverse(self) -> np.ndarray:
        """Explicit inverse via an LU solve with partial pivoting."""
        self.require_invertible()
        return np.linalg.solve(self.entries, np.eye(self.n_outputs))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """A joint distribution over a (row symbol, column symbol) pair."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = _clean_array(self.entries, "joint distribution", ndim=2)
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError(
                f"joint distribution has total mass {total!r}, not 1 within {SUM_TOL:.0e}"
            )
        object.__setattr__(self, "entries", _freeze(arr))

    @classmethod
    def from_mixture(
        cls, weights: ProbVector, conditionals: Sequence[ProbVector]
    ) -> "JointDistribution":
        """Assemble P(row=u, col=y) = weights[u] * conditionals[u][y]."""
        if len(conditionals) != weights.dimension:
            raise ValidationError(
                f"{len(conditionals)} conditionals for {weights.dimension} mixture weights"
            )
        dims = {c.dimension for c in conditionals}
        if len(dims) != 1:
            raise ValidationError("conditionals have inconsistent dimensions")
        table = np.stack([w * c.entries for w, c in zip(weights.entries, conditionals)])
        return cls(table)

    def row_marginal(self) -> ProbVector:
        return ProbVector(self.entries.sum(axis=1))

    def col_marginal(self) -> ProbVector:
        return ProbVector(self.entries.sum(axis=0))
