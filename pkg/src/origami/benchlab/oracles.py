"""Brute-force references for the objectives and the greedy driver.

These are deliberately independent of the fast code paths they check:
they evaluate the gap pointwise on simplex lattices and enumerate
partitions outright.
"""

from __future__ import annotations

import itertools
from typing import Iterator, List, Tuple

import numpy as np

from origami.folding import Partition, partition_entropy
from origami.simplex import Fold, SetExtension, as_loss, as_prob, fold_loss, fold_prob

MAX_QUADRATURE_OUTCOMES = 4
MAX_EXHAUSTIVE_OUTCOMES = 8


def _subdivisions(step: float) -> int:
    n = int(round(1.0 / step))
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide 1")
    return n


def simplex_lattice(C: int, step: float) -> np.ndarray:
    """All points of the simplex whose coordinates are multiples of ``step``."""
    n = _subdivisions(step)
    pts = []
    for bars in itertools.combinations(range(n + C - 1), C - 1):
        edges = (-1,) + bars + (n + C - 1,)
        pts.append([edges[k + 1] - edges[k] - 1 for k in range(C)])
    return np.array(pts, dtype=float) / n


def _kuhn_vertices(d: int, n: int) -> np.ndarray:
    """Vertex coordinates of the Kuhn subdivision of ``{n >= x_1 >= ... >= x_d >= 0}``.

    Returns an int array of shape ``(n**d, d + 1, d)``; every small simplex
    has the same volume.
    """
    corners = np.array(list(itertools.combinations_with_replacement(range(n - 1, -1, -1), d)), dtype=int)
    blocks = []
    for perm in itertools.permutations(range(d)):
        position = np.empty(d, dtype=int)
        position[list(perm)] = np.arange(d)
        ok = np.ones(len(corners), dtype=bool)
        for i in range(d - 1):
            if position[i] > position[i + 1]:
                ok &= corners[:, i] != corners[:, i + 1]
        base = corners[ok]
        steps = np.zeros((d + 1, d), dtype=int)
        for m, axis in enumerate(perm):
            steps[m + 1:, axis] += 1
        blocks.append(base[:, None, :] + steps[None, :, :])
    verts = np.concatenate(blocks)
    assert verts.shape[0] == n ** d
    return verts


def _order_to_simplex(x: np.ndarray, n: int) -> np.ndarray:
    """Affine map from the order simplex to probability vectors."""
    padded = np.concatenate([np.full(x.shape[:-1] + (1,), n), x, np.zeros(x.shape[:-1] + (1,), dtype=x.dtype)], axis=-1)
    return -np.diff(padded, axis=-1) / n


def _gap_at(L: np.ndarray, fold: Fold, ext: SetExtension, P: np.ndarray) -> np.ndarray:
    LP = P @ L.T
    if ext is SetExtension.WEIGHTED_SUM:
        Q = fold_prob(P, fold)
        folded = np.array([(fold_loss(L, fold, ext, p) @ q).min() for p, q in zip(P, Q)])
    else:
        # corrections vanish exactly when the merged column equals a member
        i, j = fold.source, fold.target
        merged = np.max(L[:, [i, j]], axis=1) if ext is SetExtension.WORST_CASE else L[:, i] + L[:, j]
        folded = (LP + np.outer(P[:, i], merged - L[:, i]) + np.outer(P[:, j], merged - L[:, j])).min(axis=1)
    return folded - LP.min(axis=1)


def grid_quadrature_gap(L, fold: Fold, ext="worst_case", step: float = 0.005) -> float:
    """Simplex average of the suboptimality gap by the trapezoidal rule.

    The simplex is cut into ``(1/step)**(C-1)`` equal-volume Kuhn simplices
    and the gap is averaged over each one's vertices.
    """
    L = as_loss(L)
    ext = SetExtension.parse(ext)
    C = L.shape[1]
    if C > MAX_QUADRATURE_OUTCOMES:
        raise ValueError(f"quadrature is limited to C <= {MAX_QUADRATURE_OUTCOMES}, got {C}")
    fold.check(C)
    n = _subdivisions(step)
    if C == 1:
        raise ValueError("need at least two outcomes to fold")
    verts = _kuhn_vertices(C - 1, n).reshape(-1, C - 1)
    keys, counts = np.unique(verts, axis=0, return_counts=True)
    P = _order_to_simplex(keys.astype(float), n)
    P = np.clip(P, 0.0, None)
    gaps = _gap_at(L, fold, ext, P)
    return float(counts @ gaps / counts.sum())


def _local_lattice(center: np.ndarray, spacing: float, radius: int) -> np.ndarray:
    """Points ``center + spacing * sum_k m_k (e_k - e_0)`` with ``|m_k| <= radius`` that stay on the simplex."""
    C = center.size
    m = np.array(list(itertools.product(range(-radius, radius + 1), repeat=C - 1)), dtype=float)
    offsets = np.zeros((m.shape[0], C))
    offsets[:, 1:] = m
    offsets[:, 0] = -m.sum(axis=1)
    P = center + spacing * offsets
    P = P[P.min(axis=1) >= -1e-15]
    return np.clip(P, 0.0, None)


def grid_max_gap(L, fold: Fold, ext="worst_case", step: float = 0.002, refine_to: float = 0.0,
                 candidates: int = 10) -> Tuple[float, np.ndarray]:
    """Largest gap over the simplex lattice of spacing ``step`` and where it occurs.

    With ``refine_to > 0`` the best ``candidates`` lattice points are
    zoomed into by successively finer local lattices until the spacing
    drops below ``refine_to``.  The gap is piecewise linear, so a maximizer
    between lattice points is otherwise missed by up to O(step).
    """
    L = as_loss(L)
    ext = SetExtension.parse(ext)
    P = simplex_lattice(L.shape[1], step)
    gaps = _gap_at(L, fold, ext, P)
    spacing, radius = step, 5
    while refine_to > 0 and spacing > refine_to:
        top = np.argsort(-gaps, kind="stable")[:candidates]
        # each zoom covers two old spacings around a candidate with a finer lattice
        new_spacing = 2.0 * spacing / radius
        P = np.concatenate([P[top]] + [_local_lattice(P[k], new_spacing, radius) for k in top])
        gaps = _gap_at(L, fold, ext, P)
        spacing = new_spacing
    k = int(np.argmax(gaps))
    return float(gaps[k]), P[k]


def set_partitions(C: int, cells: int) -> Iterator[List[List[int]]]:
    """Partitions of ``0..C-1`` into exactly ``cells`` blocks, in restricted-growth order."""
    def grow(z: int, blocks: List[List[int]]):
        remaining = C - z
        if remaining < cells - len(blocks):
            return
        if z == C:
            if len(blocks) == cells:
                yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(z)
            yield from grow(z + 1, blocks)
            b.pop()
        if len(blocks) < cells:
            blocks.append([z])
            yield from grow(z + 1, blocks)
            blocks.pop()

    yield from grow(0, [])


def partition_gap(L, partition: Partition, probe, ext="worst_case") -> float:
    L = as_loss(L)
    P = np.atleast_2d(as_prob(probe))
    ext = SetExtension.parse(ext)
    return float(np.mean(partition_entropy(L, partition.cells, P, ext) - (P @ L.T).min(axis=1)))


def exhaustive_partition_search(L, cell_count: int, probe, ext="worst_case") -> Tuple[Partition, float]:
    """Partition into ``cell_count`` cells with the smallest mean gap over ``probe``.

    Ties keep the first partition in restricted-growth order.
    """
    L = as_loss(L)
    C = L.shape[1]
    if C > MAX_EXHAUSTIVE_OUTCOMES:
        raise ValueError(f"exhaustive search is limited to C <= {MAX_EXHAUSTIVE_OUTCOMES}, got {C}")
    if not 1 <= cell_count <= C:
        raise ValueError(f"cell_count must lie in 1..{C}")
    P = np.atleast_2d(as_prob(probe))
    if P.shape[1] != C:
        raise ValueError("probe dimension does not match the loss matrix")
    ext = SetExtension.parse(ext)
    base = (P @ L.T).min(axis=1)
    best, best_gap = None, np.inf
    for blocks in set_partitions(C, cell_count):
        gap = float(np.mean(partition_entropy(L, blocks, P, ext) - base))
        if gap < best_gap:
            best, best_gap = blocks, gap
    return Partition(best), best_gap
