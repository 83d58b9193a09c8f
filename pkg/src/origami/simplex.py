"""Probability vectors, loss matrices, H-entropy and simplex folds.

Conventions: a loss matrix has one row per action and one column per
outcome, so ``L[a, z]`` is the loss of taking action ``a`` when outcome
``z`` occurs.  Outcome indices are 0-based.  A fold ``i -> j`` removes
index ``i`` and accumulates its mass into ``j``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

# inputs closer than this to unit mass are renormalized, others rejected
MASS_TOLERANCE = 1e-6


class DimensionError(ValueError):
    """Raised when loss matrices, vectors and folds disagree on dimension."""


class SetExtension(str, enum.Enum):
    """How a loss over outcomes is lifted to a loss over sets of outcomes."""

    WORST_CASE = "worst_case"
    WEIGHTED_SUM = "weighted_sum"
    SUM = "sum"

    @classmethod
    def parse(cls, value: Union[str, "SetExtension"]) -> "SetExtension":
        if isinstance(value, SetExtension):
            return value
        key = str(value).strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(e.value for e in cls)
            raise ValueError(f"unknown set extension {value!r} (expected one of {choices})") from None


@dataclass(frozen=True)
class Fold:
    """Merge outcome ``source`` into outcome ``target``."""

    source: int
    target: int

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError(f"fold source and target coincide ({self.source})")
        if self.source < 0 or self.target < 0:
            raise ValueError(f"negative fold index in {self.source}->{self.target}")

    def check(self, dim: int) -> None:
        if self.source >= dim or self.target >= dim:
            raise DimensionError(f"fold {self.source}->{self.target} out of range for dimension {dim}")

    def relabel(self, dim: int) -> np.ndarray:
        """Map every old index to its index after the fold.

        The source index maps to the new position of the target.
        """
        self.check(dim)
        old = np.arange(dim)
        new = np.where(old > self.source, old - 1, old)
        new[self.source] = new[self.target]
        return new

    @property
    def new_target(self) -> int:
        return self.target - 1 if self.target > self.source else self.target

    def __str__(self):
        return f"{self.source}->{self.target}"


@dataclass(frozen=True)
class LossMatrix:
    """A decision-loss table with optional action and outcome labels."""

    entries: np.ndarray
    actions: Optional[tuple] = None
    outcomes: Optional[tuple] = None

    def __post_init__(self):
        entries = as_loss(self.entries)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if self.actions is not None:
            object.__setattr__(self, "actions", tuple(str(a) for a in self.actions))
            if len(self.actions) != entries.shape[0]:
                raise DimensionError("action label count does not match the number of rows")
        if self.outcomes is not None:
            object.__setattr__(self, "outcomes", tuple(str(o) for o in self.outcomes))
            if len(self.outcomes) != entries.shape[1]:
                raise DimensionError("outcome label count does not match the number of columns")

    @property
    def action_count(self) -> int:
        return self.entries.shape[0]

    @property
    def outcome_count(self) -> int:
        return self.entries.shape[1]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


LossLike = Union[LossMatrix, np.ndarray, Sequence[Sequence[float]]]


def as_loss(L: LossLike) -> np.ndarray:
    """Validate a loss matrix and return it as a 2-d float array."""
    if isinstance(L, LossMatrix):
        return L.entries
    arr = np.array(L, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"loss matrix must be 2-d and nonempty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("loss matrix has non-finite entries")
    return arr


def as_prob(p, tol: float = MASS_TOLERANCE) -> np.ndarray:
    """Validate one probability vector (or a batch, one per row) and renormalize.

    Vectors whose total mass is off by more than ``tol`` are rejected.
    """
    arr = np.array(p, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[-1] < 1:
        raise DimensionError(f"probability vectors must be 1-d or 2-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("probability vector has non-finite entries")
    if np.any(arr < 0):
        if arr.min() < -tol:
            raise ValueError("probability vector has negative entries")
        arr = np.clip(arr, 0.0, None)
    mass = arr.sum(axis=-1, keepdims=True)
    if np.any(np.abs(mass - 1.0) > tol):
        raise ValueError(f"probability mass deviates from 1 by more than {tol:g}")
    return arr / mass


def _check_dims(L: np.ndarray, p: np.ndarray) -> None:
    if L.shape[1] != p.shape[-1]:
        raise DimensionError(f"loss matrix has {L.shape[1]} outcomes but vector has dimension {p.shape[-1]}")


def h_entropy(L: LossLike, p) -> Union[float, np.ndarray]:
    """Bayes-optimal expected loss ``min_a (L p)_a``.

    ``p`` may be a single vector (returns a float) or a batch with one
    vector per row (returns an array).
    """
    L = as_loss(L)
    p = as_prob(p)
    _check_dims(L, p)
    values = (p @ L.T).min(axis=-1)
    return float(values) if p.ndim == 1 else values


def argmin_action(L: LossLike, p) -> Union[int, np.ndarray]:
    """Index of the Bayes action; ties go to the smallest action index."""
    L = as_loss(L)
    p = as_prob(p)
    _check_dims(L, p)
    actions = np.argmin(p @ L.T, axis=-1)
    return int(actions) if p.ndim == 1 else actions


def fold_prob(p, fold: Fold) -> np.ndarray:
    """Apply ``fold`` to a vector or to each row of a batch."""
    p = np.asarray(p, dtype=float)
    dim = p.shape[-1]
    fold.check(dim)
    merged = p[..., fold.source] + p[..., fold.target]
    q = np.delete(p, fold.source, axis=-1)
    q[..., fold.new_target] = merged
    return q


def merge_columns(L: np.ndarray, i: int, j: int, ext: SetExtension, p=None):
    """Merged loss column for outcomes ``i`` and ``j``.

    Returns ``(column, degenerate)``; ``degenerate`` is True when the
    weighted sum had zero mass to weight by and the worst case was used.
    """
    a, b = L[:, i], L[:, j]
    if ext is SetExtension.WORST_CASE:
        return np.maximum(a, b), False
    if ext is SetExtension.SUM:
        return a + b, False
    if p is None:
        raise ValueError("the weighted_sum extension needs a probability vector")
    p = np.asarray(p, dtype=float)
    mass = p[i] + p[j]
    if mass <= 0:
        return np.maximum(a, b), True
    return (a * p[i] + b * p[j]) / mass, False


def fold_loss(L: LossLike, fold: Fold, ext="worst_case", p=None, return_flag: bool = False):
    """Fold the columns of a loss matrix consistently with :func:`fold_prob`.

    With ``return_flag=True`` also returns whether the weighted-sum
    fallback to the worst case was taken (zero mass on both outcomes).
    """
    L = as_loss(L)
    ext = SetExtension.parse(ext)
    fold.check(L.shape[1])
    if ext is SetExtension.WEIGHTED_SUM:
        if p is None:
            raise ValueError("the weighted_sum extension needs a probability vector")
        p = as_prob(p)
        _check_dims(L, p)
    elif p is not None:
        raise ValueError(f"{ext.value} extension does not take a probability vector")
    column, degenerate = merge_columns(L, fold.source, fold.target, ext, p)
    out = np.delete(L, fold.source, axis=1)
    out[:, fold.new_target] = column
    return (out, degenerate) if return_flag else out


def subopt_gap(L: LossLike, p, fold: Fold, ext="worst_case") -> float:
    """Increase of H-entropy caused by applying ``fold`` to ``p``."""
    L = as_loss(L)
    ext = SetExtension.parse(ext)
    p = as_prob(p)
    _check_dims(L, p)
    context = p if ext is SetExtension.WEIGHTED_SUM else None
    folded = fold_loss(L, fold, ext, context)
    return h_entropy(folded, fold_prob(p, fold)) - h_entropy(L, p)


def sample_simplex(count: int, dim: int, seed=None) -> np.ndarray:
    """Draw ``count`` points uniformly from the simplex of dimension ``dim``.

    Normalized unit-rate exponentials (a flat Dirichlet).  ``seed`` may be
    an int, a sequence of ints or a ``numpy.random.Generator``.
    """
    if count < 1 or dim < 1:
        raise ValueError("count and dim must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = rng.standard_exponential((count, dim))
    return draws / draws.sum(axis=1, keepdims=True)
