"""Greedy iterative folding, fold trees and the partitions they induce."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from origami.objectives import VertexObjective
from origami.simplex import (
    Fold,
    SetExtension,
    as_loss,
    as_prob,
    fold_loss,
    fold_prob,
    sample_simplex,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_PROBE_SIZE = 10_000


class StopRuleError(ValueError):
    """The stop rule cannot be met for the given number of outcomes."""


@dataclass(frozen=True)
class Merge:
    step: int
    source: int
    target: int
    objective: Optional[float] = None


@dataclass
class FoldTree:
    """Merge tree of a fold sequence.

    Leaves are the outcomes ``0..C-1``; the node created by merge ``k`` has
    id ``C + k``.  The frontier lists the live nodes in the positional order
    used by the folded probability vectors.
    """

    leaf_count: int
    merges: List[Merge] = field(default_factory=list)
    _live: Optional[tuple] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.leaf_count < 1:
            raise ValueError("a fold tree needs at least one leaf")
        self.frontier()  # validates merges

    def frontier(self, steps: Optional[int] = None) -> List[int]:
        full = steps is None or steps >= len(self.merges)
        if full and self._live is not None and self._live[0] == len(self.merges):
            return list(self._live[1])
        nodes = list(range(self.leaf_count))
        for k, m in enumerate(self.merges[:steps]):
            if m.step != k:
                raise ValueError(f"merge {k} carries step {m.step}")
            try:
                s, t = nodes.index(m.source), nodes.index(m.target)
            except ValueError:
                raise ValueError(f"merge {k} refers to a node that is not on the frontier") from None
            if s == t:
                raise ValueError(f"merge {k} merges node {m.source} with itself")
            nodes[t] = self.leaf_count + k
            del nodes[s]
        if full:
            self._live = (len(self.merges), tuple(nodes))
        return nodes

    @property
    def fold_count(self) -> int:
        return len(self.merges)

    def merge_nodes(self, source: int, target: int, objective: Optional[float] = None) -> Fold:
        """Record a merge of two frontier nodes, addressed by node id."""
        nodes = self.frontier()
        if source not in nodes or target not in nodes:
            raise ValueError(f"nodes {source}, {target} are not both on the frontier {nodes}")
        fold = Fold(nodes.index(source), nodes.index(target))
        obj = None if objective is None else float(objective)
        self.merges.append(Merge(len(self.merges), source, target, obj))
        nodes[fold.target] = self.leaf_count + len(self.merges) - 1
        del nodes[fold.source]
        self._live = (len(self.merges), tuple(nodes))
        return fold

    def add_fold(self, fold: Fold, objective: Optional[float] = None) -> int:
        """Record a positional fold of the current frontier; returns the new node id."""
        nodes = self.frontier()
        fold.check(len(nodes))
        self.merge_nodes(nodes[fold.source], nodes[fold.target], objective)
        return self.leaf_count + len(self.merges) - 1

    def folds(self) -> List[Fold]:
        """The positional fold sequence that replays this tree."""
        nodes = list(range(self.leaf_count))
        out = []
        for k, m in enumerate(self.merges):
            s, t = nodes.index(m.source), nodes.index(m.target)
            out.append(Fold(s, t))
            nodes[t] = self.leaf_count + k
            del nodes[s]
        return out

    def leaves(self, node: int) -> List[int]:
        if node < self.leaf_count:
            return [node]
        m = self.merges[node - self.leaf_count]
        return sorted(self.leaves(m.source) + self.leaves(m.target))

    def partition(self, steps: Optional[int] = None) -> "Partition":
        return Partition([self.leaves(n) for n in self.frontier(steps)])

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "leaf_count": self.leaf_count,
            "merges": [
                {"step": m.step, "source": m.source, "target": m.target, "objective": m.objective}
                for m in self.merges
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FoldTree":
        if data.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ValueError(f"unsupported fold tree schema {data.get('schema')}")
        merges = [
            Merge(int(m["step"]), int(m["source"]), int(m["target"]),
                  None if m.get("objective") is None else float(m["objective"]))
            for m in data.get("merges", [])
        ]
        return cls(int(data["leaf_count"]), merges)


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of ``0..C-1``; cells keep the frontier order."""

    cells: tuple
    labels: Optional[tuple] = None

    def __init__(self, cells, labels=None):
        cells = tuple(tuple(sorted(int(z) for z in cell)) for cell in cells)
        flat = sorted(z for cell in cells for z in cell)
        if any(len(c) == 0 for c in cells) or flat != list(range(len(flat))):
            raise ValueError("cells must be nonempty, disjoint and cover 0..C-1")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "labels", None if labels is None else tuple(str(s) for s in labels))

    @property
    def outcome_count(self) -> int:
        return sum(len(c) for c in self.cells)

    def __len__(self):
        return len(self.cells)

    def cell_index(self) -> np.ndarray:
        """Array mapping each outcome to the index of its cell."""
        index = np.empty(self.outcome_count, dtype=int)
        for k, cell in enumerate(self.cells):
            index[list(cell)] = k
        return index

    def to_dict(self) -> dict:
        out = {"schema": SCHEMA_VERSION, "cells": [list(c) for c in self.cells]}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Partition":
        if data.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ValueError(f"unsupported partition schema {data.get('schema')}")
        return cls(data["cells"], data.get("labels"))


@dataclass(frozen=True, eq=False)
class StopRule:
    """When to stop folding: after ``k`` folds, at ``n`` cells, or before the gap exceeds ``tau``."""

    kind: str
    value: float
    probe: Optional[np.ndarray] = None
    probe_size: int = DEFAULT_PROBE_SIZE

    KINDS = ("fold_count", "target_cells", "gap_tolerance")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown stop rule {self.kind!r}")
        if self.value < 0:
            raise StopRuleError(f"{self.kind} must be nonnegative")

    @classmethod
    def fold_count(cls, k: int) -> "StopRule":
        return cls("fold_count", int(k))

    @classmethod
    def target_cells(cls, n: int) -> "StopRule":
        return cls("target_cells", int(n))

    @classmethod
    def gap_tolerance(cls, tau: float, probe=None, probe_size: int = DEFAULT_PROBE_SIZE) -> "StopRule":
        return cls("gap_tolerance", float(tau), None if probe is None else np.atleast_2d(as_prob(probe)), probe_size)

    def max_folds(self, C: int) -> int:
        if self.kind == "fold_count":
            if self.value > C - 1:
                raise StopRuleError(f"cannot perform {int(self.value)} folds on {C} outcomes")
            return int(self.value)
        if self.kind == "target_cells":
            if not 1 <= self.value <= C:
                raise StopRuleError(f"cannot reach {int(self.value)} cells from {C} outcomes")
            return C - int(self.value)
        return C - 1

    def clamped(self, C: int) -> "StopRule":
        """The same rule made satisfiable for a (sub)problem with ``C`` outcomes."""
        if self.kind == "fold_count":
            return StopRule.fold_count(min(int(self.value), C - 1))
        if self.kind == "target_cells":
            return StopRule.target_cells(min(max(int(self.value), 1), C))
        probe = self.probe if self.probe is not None and self.probe.shape[1] == C else None
        return StopRule("gap_tolerance", self.value, probe, self.probe_size)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "value": self.value}
        if self.kind == "gap_tolerance":
            out["probe_size"] = self.probe_size if self.probe is None else int(self.probe.shape[0])
        return out


class OrigamiResult(NamedTuple):
    tree: FoldTree
    partition: Partition
    folded_loss: np.ndarray


def partition_entropy(L: np.ndarray, cells: Sequence[Sequence[int]], P: np.ndarray, ext: SetExtension) -> np.ndarray:
    """H-entropy of every row of ``P`` after folding it onto ``cells``.

    Folded expected losses are the unfolded ones plus a per-cell
    correction, so singleton cells and identical columns add exactly zero.
    """
    folded = P @ L.T
    for cell in cells:
        cell = list(cell)
        # the weighted sum reproduces each cell's expected loss, so it needs no correction
        if len(cell) < 2 or ext is SetExtension.WEIGHTED_SUM:
            continue
        block = L[:, cell]
        if ext is SetExtension.WORST_CASE:
            folded += P[:, cell] @ (block.max(axis=1)[:, None] - block).T
        else:
            folded += P[:, cell] @ (block.sum(axis=1)[:, None] - block).T
    return folded.min(axis=1)


def cumulative_gap(tree: FoldTree, L_original, probe, ext="worst_case") -> float:
    """Mean H-entropy increase over ``probe`` from applying every fold of ``tree``."""
    L = as_loss(L_original)
    ext = SetExtension.parse(ext)
    P = np.atleast_2d(as_prob(probe))
    if L.shape[1] != tree.leaf_count or P.shape[1] != tree.leaf_count:
        raise ValueError(
            f"tree has {tree.leaf_count} leaves, loss matrix {L.shape[1]} outcomes, probe dimension {P.shape[1]}"
        )
    if not tree.merges:
        return 0.0
    base = (P @ L.T).min(axis=1)
    return float(np.mean(partition_entropy(L, tree.partition().cells, P, ext) - base))


class _GapTracker:
    """Running cumulative gap over a probe set under greedy folding.

    Worst-case and sum folds update the probe's expected losses with a
    rank-two correction per fold; the weighted sum recomputes from cells.
    """

    def __init__(self, L: np.ndarray, P: np.ndarray, ext: SetExtension):
        self.L0, self.P, self.ext = L, P, ext
        self.base = (P @ L.T).min(axis=1)
        self.LP = P @ L.T
        self.Q = P.copy()
        self.cols = L.copy()
        self.slots = list(range(L.shape[1]))

    def _candidate(self, fold: Fold):
        si, sj = self.slots[fold.source], self.slots[fold.target]
        li, lj = self.cols[:, si], self.cols[:, sj]
        merged = np.maximum(li, lj) if self.ext is SetExtension.WORST_CASE else li + lj
        qi, qj = self.Q[:, si:si + 1], self.Q[:, sj:sj + 1]
        LP = self.LP + (merged - li) * qi + (merged - lj) * qj
        return si, sj, merged, LP

    def gap_after(self, fold: Fold, tree: FoldTree) -> float:
        if self.ext is SetExtension.WEIGHTED_SUM:
            trial = FoldTree(tree.leaf_count, list(tree.merges))
            trial.add_fold(fold)
            return float(np.mean(partition_entropy(self.L0, trial.partition().cells, self.P, self.ext) - self.base))
        _, _, _, LP = self._candidate(fold)
        return float(np.mean(LP.min(axis=1) - self.base))

    def commit(self, fold: Fold) -> None:
        if self.ext is SetExtension.WEIGHTED_SUM:
            return
        si, sj, merged, LP = self._candidate(fold)
        self.LP = LP
        self.Q[:, sj] += self.Q[:, si]
        self.Q[:, si] = 0.0
        self.cols[:, sj] = merged
        del self.slots[fold.source]


def run_origami(L, objective=None, ext="worst_case", stop: Optional[StopRule] = None, seed=0,
                jobs: int = 1, context=None) -> OrigamiResult:
    """Fold greedily until ``stop`` is met.

    Every step scores all pairs on the current folded loss matrix, applies
    the best fold to it and records the merge.  For the weighted-sum
    extension the folded matrix is weighted by ``context`` (uniform over
    the original outcomes by default).  ``seed`` drives the default probe
    of a gap-tolerance rule.
    """
    L0 = as_loss(L)
    ext = SetExtension.parse(ext)
    objective = objective or VertexObjective()
    stop = stop or StopRule.target_cells(1)
    C = L0.shape[1]
    if C < 2 and stop.max_folds(C) > 0:
        raise StopRuleError("need at least two outcomes to fold")
    n_folds = stop.max_folds(C)

    tracker = None
    if stop.kind == "gap_tolerance":
        probe = stop.probe if stop.probe is not None else sample_simplex(stop.probe_size, C, seed)
        if probe.shape[1] != C:
            raise StopRuleError(f"probe dimension {probe.shape[1]} does not match {C} outcomes")
        tracker = _GapTracker(L0, probe, ext)

    if ext is SetExtension.WEIGHTED_SUM:
        weights = np.full(C, 1.0 / C) if context is None else as_prob(context)
    tree = FoldTree(C)
    current = L0.copy()
    for step in range(n_folds):
        M = objective.matrix(current, ext, step=step, jobs=jobs)
        fold = M.argmin()
        value = float(M.entries[fold.source, fold.target])
        if tracker is not None:
            gap = tracker.gap_after(fold, tree)
            if gap > stop.value:
                log.debug("stopping before step %d: gap %.3g exceeds %.3g", step, gap, stop.value)
                break
            tracker.commit(fold)
        if ext is SetExtension.WEIGHTED_SUM:
            current = fold_loss(current, fold, ext, weights)
            weights = fold_prob(weights, fold)
        else:
            current = fold_loss(current, fold, ext)
        tree.add_fold(fold, value)
    return OrigamiResult(tree, tree.partition(), current)


@dataclass
class HierarchyNode:
    """A set of original outcomes and its refinement into child sets."""

    outcomes: tuple
    children: List["HierarchyNode"] = field(default_factory=list)
    tree: Optional[FoldTree] = None

    def leaves(self) -> List[tuple]:
        if not self.children:
            return [self.outcomes]
        return [leaf for child in self.children for leaf in child.leaves()]

    def level(self, depth: int) -> List[tuple]:
        """The sets ``depth`` levels below this node (leaves stop early)."""
        if depth == 0 or not self.children:
            return [self.outcomes]
        return [s for child in self.children for s in child.level(depth - 1)]

    def to_dict(self) -> dict:
        return {"outcomes": list(self.outcomes), "children": [c.to_dict() for c in self.children]}


def hierarchical_origami(L, objective=None, ext="worst_case", outer_stop: Optional[StopRule] = None,
                         inner_stop: Optional[StopRule] = None, seed=0, depth: int = 2,
                         jobs: int = 1) -> HierarchyNode:
    """Fold once, then refold inside every cell of the result.

    Inner runs see the original loss columns of their cell, not the folded
    matrix.  ``depth`` counts levels below the root; cells of one outcome
    are not refined.
    """
    L0 = as_loss(L)
    outer_stop = outer_stop or StopRule.target_cells(1)
    inner_stop = inner_stop or StopRule.target_cells(1)

    def build(outcomes: tuple, stop: StopRule, levels_left: int, salt: int) -> HierarchyNode:
        node = HierarchyNode(outcomes)
        if levels_left == 0 or len(outcomes) < 2:
            return node
        sub = L0[:, list(outcomes)]
        result = run_origami(sub, objective, ext, stop.clamped(len(outcomes)), [seed, salt], jobs)
        node.tree = result.tree
        for k, cell in enumerate(result.partition.cells):
            mapped = tuple(outcomes[z] for z in cell)
            node.children.append(build(mapped, inner_stop, levels_left - 1, salt * 1000 + k + 1))
        return node

    return build(tuple(range(L0.shape[1])), outer_stop, depth, 0)


def project_dataset(tree: FoldTree, labels) -> np.ndarray:
    """Map fine-grained outcome labels to the index of their frontier cell."""
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= tree.leaf_count):
        raise ValueError(f"labels must lie in 0..{tree.leaf_count - 1}")
    return tree.partition().cell_index()[labels]
