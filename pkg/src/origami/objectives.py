"""Fold-selection objectives.

Each objective scores every unordered outcome pair ``(i, j)``, ``i < j``,
and the fold ``i -> j`` with the smallest score is taken next.  Scores
live in an :class:`ObjectiveMatrix`; cells outside the strict upper
triangle hold ``+inf`` and never win the argmin.
"""

from __future__ import annotations

import csv
import io
from functools import lru_cache
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from origami.lp import solve_lp
from origami.simplex import (
    Fold,
    SetExtension,
    as_loss,
    as_prob,
    fold_loss,
    fold_prob,
    merge_columns,
    sample_simplex,
)

SENTINEL = np.inf


@lru_cache(maxsize=128)
def pair_indices(C: int):
    """Row-major ``(i, j)`` index arrays over the strict upper triangle."""
    iu, ju = np.triu_indices(C, 1)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


@lru_cache(maxsize=128)
def _upper_mask(C: int) -> np.ndarray:
    mask = np.triu(np.ones((C, C), dtype=bool), 1)
    mask.setflags(write=False)
    return mask


@dataclass
class ObjectiveMatrix:
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        C = self.size
        if self.entries.shape != (C, C) or C < 2:
            raise ValueError(f"objective matrix must be square with C >= 2, got {self.entries.shape}")
        mask = _upper_mask(C)
        self.entries[~mask] = SENTINEL
        if not np.all(np.isfinite(self.entries[mask])):
            raise FloatingPointError("objective matrix has non-finite entries")

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_pairs(cls, C: int, values) -> "ObjectiveMatrix":
        values = np.asarray(values, dtype=float)
        iu, ju = pair_indices(C)
        if values.shape != iu.shape:
            raise ValueError(f"expected {iu.size} pair values for C={C}, got {values.size}")
        entries = np.full((C, C), SENTINEL)
        entries[iu, ju] = values
        return cls(entries)

    def pairs(self) -> np.ndarray:
        return self.entries[pair_indices(self.size)]

    def argmin(self) -> Fold:
        """Fold with the smallest entry; ties resolve lexicographically."""
        iu, ju = pair_indices(self.size)
        k = int(np.argmin(self.entries[iu, ju]))
        return Fold(int(iu[k]), int(ju[k]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["i\\j"] + list(range(self.size)))
        for i, row in enumerate(self.entries):
            writer.writerow([i] + [repr(float(v)) if j > i else "" for j, v in enumerate(row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ObjectiveMatrix":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        C = len(rows)
        entries = np.full((C, C), SENTINEL)
        for i, row in enumerate(rows):
            for j, cell in enumerate(row[1:]):
                if cell != "":
                    entries[i, j] = float(cell)
        return cls(entries)


def _pair_map(func: Callable[[int, int], float], C: int, jobs: int = 1) -> np.ndarray:
    """Evaluate ``func`` on every pair; the result does not depend on ``jobs``."""
    iu, ju = pair_indices(C)
    pairs = list(zip(iu.tolist(), ju.tolist()))
    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(lambda ij: func(*ij), pairs))
    else:
        values = [func(i, j) for i, j in pairs]
    return np.array(values, dtype=float)


# ----------------------------------------------------------------------
# integral objective


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    sample_count: int
    sample_variance: float

    @property
    def standard_error(self) -> float:
        return float(np.sqrt(self.sample_variance / self.sample_count))


def _estimate(gaps: np.ndarray) -> MCEstimate:
    n = gaps.size
    var = float(gaps.var(ddof=1)) if n > 1 else 0.0
    return MCEstimate(float(gaps.mean()), n, var)


def integral_objective(L, fold: Fold, samples, ext="worst_case") -> MCEstimate:
    """Monte Carlo mean of the suboptimality gap of ``fold`` over ``samples``."""
    L = as_loss(L)
    ext = SetExtension.parse(ext)
    P = np.atleast_2d(as_prob(samples))
    if P.shape[1] != L.shape[1]:
        raise ValueError(f"samples have dimension {P.shape[1]}, loss matrix has {L.shape[1]} outcomes")
    fold.check(L.shape[1])
    LP = P @ L.T
    return _estimate(_pair_gaps(L, P, LP, LP.min(axis=1), fold.source, fold.target, ext))


def _pair_gaps(L, P, LP, H, i, j, ext):
    """Per-sample gaps of fold ``i -> j`` from precomputed ``LP = P @ L.T``.

    Only columns ``i`` and ``j`` change, so the folded expected losses are
    a rank-two update of ``LP``.
    """
    pi, pj = P[:, i:i + 1], P[:, j:j + 1]
    li, lj = L[:, i], L[:, j]
    if ext is SetExtension.WEIGHTED_SUM:
        mass = pi + pj
        safe = np.where(mass > 0, mass, 1.0)
        merged = np.where(mass > 0, (pi * li + pj * lj) / safe, np.maximum(li, lj))
    else:
        merged, _ = merge_columns(L, i, j, ext)
    # written as corrections so identical columns give exactly zero
    folded = LP + (merged - li) * pi + (merged - lj) * pj
    return folded.min(axis=1) - H


def all_pair_means(L: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Worst-case integral objective of every pair at once, row-major over ``i < j``.

    Vectorized counterpart of :func:`integral_objective_matrix` for many
    small matrices (surrogate training data).
    """
    iu, ju = pair_indices(L.shape[1])
    LP = P @ L.T
    pi, pj = P[:, None, iu], P[:, None, ju]
    li, lj = L[None, :, iu], L[None, :, ju]
    folded = LP[:, :, None] + (np.maximum(li, lj) - li) * pi + (np.maximum(li, lj) - lj) * pj
    return (folded.min(axis=1) - LP.min(axis=1)[:, None]).mean(axis=0)


def integral_objective_matrix(L, sample_count: int = 1000, seed=0, ext="worst_case",
                              jobs: int = 1, samples=None, return_estimates: bool = False):
    """Integral objective for every pair, reusing one sample set for all pairs."""
    L = as_loss(L)
    ext = SetExtension.parse(ext)
    C = L.shape[1]
    if C < 2:
        raise ValueError("need at least two outcomes to fold")
    P = sample_simplex(sample_count, C, seed) if samples is None else np.atleast_2d(as_prob(samples))
    LP = P @ L.T
    H = LP.min(axis=1)
    estimates = {}

    def score(i, j):
        est = _estimate(_pair_gaps(L, P, LP, H, i, j, ext))
        estimates[(i, j)] = est
        return est.mean

    M = ObjectiveMatrix.from_pairs(C, _pair_map(score, C, jobs))
    return (M, estimates) if return_estimates else M


# ----------------------------------------------------------------------
# max-increase objective via the concave-convex procedure


def folded_composite(L: np.ndarray, fold: Fold, ext: SetExtension) -> np.ndarray:
    """Matrix ``M`` with ``M @ p == L~ @ fold(p)`` for every ``p``.

    For the weighted sum the folded expected losses equal the unfolded
    ones, so ``M`` is ``L`` itself.
    """
    if ext is SetExtension.WEIGHTED_SUM:
        return L.copy()
    merged, _ = merge_columns(L, fold.source, fold.target, ext)
    M = L.copy()
    M[:, fold.source] = merged
    M[:, fold.target] = merged
    return M


@dataclass(frozen=True)
class CCPState:
    current_point: np.ndarray
    supergradient: np.ndarray
    surrogate_value: float
    true_value: float
    iteration: int


@dataclass
class CCPResult:
    value: float
    maximizer: np.ndarray
    traces: List[List[CCPState]] = field(default_factory=list)

    def __iter__(self):
        yield self.value
        yield self.maximizer


def _ccp_restart(L, M, p, tol, max_iter):
    def true_value(x):
        return float((M @ x).min() - (L @ x).min())

    C = L.shape[1]
    A = L.shape[0]
    # variables (p_0..p_{C-1}, t); t <= (M p)_a for every action, sum p = 1
    A_ub = np.hstack([-M, np.ones((A, 1))])
    b_ub = np.zeros(A)
    A_eq = np.concatenate([np.ones(C), [0.0]])[None, :]
    value = true_value(p)
    trace = [CCPState(p, L[int(np.argmin(L @ p))], value, value, 0)]
    for it in range(1, max_iter + 1):
        g = L[int(np.argmin(L @ p))]
        x, surrogate = solve_lp(np.concatenate([-g, [1.0]]), A_ub, b_ub, A_eq, [1.0], free=[C])
        candidate = np.clip(x[:C], 0.0, None)
        candidate /= candidate.sum()
        new_value = true_value(candidate)
        if new_value < value:
            break
        improvement = new_value - value
        p, value = candidate, new_value
        trace.append(CCPState(p, g, surrogate, value, it))
        if improvement < tol:
            break
    return value, p, trace


def ccp_max_increase(L, fold: Fold, ext="worst_case", restarts: int = 5, tol: float = 1e-6,
                     seed=0, max_iter: int = 100, init=None) -> CCPResult:
    """Local maximum of the H-entropy increase caused by ``fold``.

    Each restart starts from a uniform simplex sample (or the rows of
    ``init``), linearizes the subtracted H-entropy at the iterate with the
    minimizing row of ``L``, and solves the resulting concave program as an
    epigraph LP, until the true objective improves by less than ``tol``.
    """
    L = as_loss(L)
    ext = SetExtension.parse(ext)
    C = L.shape[1]
    if C < 2 or restarts < 1 or tol <= 0:
        raise ValueError("need C >= 2, restarts >= 1 and tol > 0")
    fold.check(C)
    M = folded_composite(L, fold, ext)
    starts = sample_simplex(restarts, C, seed) if init is None else np.atleast_2d(as_prob(init))
    best = CCPResult(-np.inf, starts[0])
    for p0 in starts:
        value, p, trace = _ccp_restart(L, M, p0, tol, max_iter)
        best.traces.append(trace)
        if value > best.value:
            best.value, best.maximizer = value, p
    return best


def max_increase_objective_matrix(L, ext="worst_case", restarts: int = 5, tol: float = 1e-6,
                                  seed: int = 0, max_iter: int = 100, jobs: int = 1) -> ObjectiveMatrix:
    L = as_loss(L)
    ext = SetExtension.parse(ext)

    def score(i, j):
        # pair-indexed substream keeps results independent of scheduling
        return ccp_max_increase(L, Fold(i, j), ext, restarts, tol, [seed, i, j], max_iter).value

    return ObjectiveMatrix.from_pairs(L.shape[1], _pair_map(score, L.shape[1], jobs))


# ----------------------------------------------------------------------
# vertex objective


def vertex_objective(L, i: int, j: int) -> float:
    """``|min_a L[a, i] - min_a L[a, j]|``, the H-entropy difference of two vertices."""
    L = as_loss(L)
    Fold(i, j).check(L.shape[1])
    return float(abs(L[:, i].min() - L[:, j].min()))


def vertex_objective_matrix(L) -> ObjectiveMatrix:
    L = as_loss(L)
    m = L.min(axis=0)
    iu, ju = pair_indices(L.shape[1])
    return ObjectiveMatrix.from_pairs(L.shape[1], np.abs(m[iu] - m[ju]))


# ----------------------------------------------------------------------
# objective configurations used by the folding driver


@dataclass(frozen=True)
class VertexObjective:
    kind = "vertex"

    def matrix(self, L, ext="worst_case", step: int = 0, jobs: int = 1) -> ObjectiveMatrix:
        return vertex_objective_matrix(L)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class IntegralObjective:
    samples: int = 1000
    seed: int = 0
    kind = "integral"

    def matrix(self, L, ext="worst_case", step: int = 0, jobs: int = 1) -> ObjectiveMatrix:
        return integral_objective_matrix(L, self.samples, [self.seed, step], ext, jobs=jobs)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "samples": self.samples, "seed": self.seed}


@dataclass(frozen=True)
class MaxIncreaseObjective:
    restarts: int = 5
    tol: float = 1e-6
    max_iter: int = 100
    seed: int = 0
    kind = "max-increase"

    def matrix(self, L, ext="worst_case", step: int = 0, jobs: int = 1) -> ObjectiveMatrix:
        # step folded into the seed so each greedy step draws fresh starts
        seed = int(np.random.SeedSequence([self.seed, step]).generate_state(1)[0])
        return max_increase_objective_matrix(L, ext, self.restarts, self.tol, seed, self.max_iter, jobs)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "restarts": self.restarts, "tol": self.tol,
                "max_iter": self.max_iter, "seed": self.seed}


def find_best_fold(L, objective=None, ext="worst_case", step: int = 0, jobs: int = 1) -> Fold:
    """Greedy choice of the next fold under ``objective`` (vertex by default)."""
    objective = objective or VertexObjective()
    L = as_loss(L)
    if L.shape[1] < 2:
        raise ValueError("need at least two outcomes to fold")
    return objective.matrix(L, ext, step=step, jobs=jobs).argmin()
