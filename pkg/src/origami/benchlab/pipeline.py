"""Prediction-to-decision pipelines on the synthetic world.

Every strategy sees the same per-seed train/test split, so strategy
differences are paired by seed.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np

from origami.benchlab.predictors import TabularPredictor
from origami.benchlab.world import SyntheticWorld
from origami.folding import Partition, StopRule, run_origami
from origami.objectives import VertexObjective

BASE_STRATEGIES = ("random_action", "direct_policy", "location_predict", "location_expected")


@dataclass(frozen=True)
class Strategy:
    kind: str
    cells: Optional[int] = None

    @classmethod
    def parse(cls, text) -> "Strategy":
        if isinstance(text, Strategy):
            return text
        text = str(text).strip()
        if text in BASE_STRATEGIES:
            return cls(text)
        m = re.fullmatch(r"origami[(:_ ]?(\d+)\)?", text)
        if not m:
            raise ValueError(f"unknown strategy {text!r}")
        return cls("origami", int(m.group(1)))

    def __str__(self):
        return self.kind if self.cells is None else f"origami({self.cells})"


@dataclass
class PipelineRun:
    strategy: str
    seed: int
    decision_loss: float
    predict_accuracy: Optional[float]
    actions: np.ndarray


def plurality_actions(L: np.ndarray, partition: Partition) -> np.ndarray:
    """Per cell, the action that is optimal for the most member outcomes.

    Ties go to the smallest action index.
    """
    best = np.argmin(L, axis=0)
    out = np.empty(len(partition), dtype=int)
    for c, cell in enumerate(partition.cells):
        counts = np.bincount(best[list(cell)], minlength=L.shape[0])
        out[c] = int(np.argmax(counts))
    return out


@lru_cache(maxsize=32)
def _world_partition(world_key, L_bytes, shape, cells: int) -> Partition:
    L = np.frombuffer(L_bytes).reshape(shape)
    return run_origami(L, VertexObjective(), "worst_case", StopRule.target_cells(cells)).partition


def world_partition(world: SyntheticWorld, cells: int) -> Partition:
    """Vertex-objective partition of the world's outcomes into ``cells`` cells."""
    L = np.ascontiguousarray(world.loss, dtype=float)
    return _world_partition((world.grid_size, world.seed), L.tobytes(), L.shape, int(cells))


def _bayes_actions(L: np.ndarray, probs: np.ndarray) -> np.ndarray:
    return np.argmin(probs @ L.T, axis=1)


def _location_fit(world, train, test):
    model = TabularPredictor(world.outcome_count).fit(train.contexts, train.labels)
    return model.predict_proba(test.contexts)


def _run_one(world: SyntheticWorld, strategy: Strategy, train_size: int, test_size: int, seed: int) -> PipelineRun:
    L = world.loss
    data = world.sample_dataset(train_size, test_size, seed=[world.seed, seed])
    train, test = data.part("train"), data.part("test")
    accuracy = None
    if strategy.kind == "random_action":
        rng = np.random.default_rng([world.seed, seed, 1])
        actions = rng.integers(L.shape[0], size=len(test.labels))
    elif strategy.kind == "direct_policy":
        model = TabularPredictor(L.shape[0]).fit_costs(train.contexts, L[:, train.labels].T)
        actions = model.predict(test.contexts)
    elif strategy.kind in ("location_predict", "location_expected"):
        probs = _location_fit(world, train, test)
        predicted = np.argmax(probs, axis=1)
        accuracy = float(np.mean(predicted == test.labels))
        if strategy.kind == "location_predict":
            actions = np.argmin(L, axis=0)[predicted]
        else:
            actions = _bayes_actions(L, probs)
    else:
        partition = world_partition(world, strategy.cells)
        cell_of = partition.cell_index()
        model = TabularPredictor(len(partition)).fit(train.contexts, cell_of[train.labels])
        predicted = model.predict(test.contexts)
        actions = plurality_actions(L, partition)[predicted]
        accuracy = float(np.mean(predicted == cell_of[test.labels]))
    loss = float(np.mean(L[actions, test.labels]))
    return PipelineRun(str(strategy), int(seed), loss, accuracy, np.asarray(actions, dtype=int))


def simulate_pipeline(world: SyntheticWorld, strategy, train_size: int = 60, seeds: Sequence[int] = (0,),
                      test_size: int = 200, jobs: int = 1) -> List[PipelineRun]:
    """Per-seed decision loss and prediction accuracy of one strategy.

    ``strategy`` is one of

    * ``random_action``: a uniformly random action;
    * ``direct_policy``: a softmax policy fit to minimize empirical loss;
    * ``location_predict``: the best action for the most probable location;
    * ``location_expected``: the action minimizing expected loss under the
      location predictor's full distribution;
    * ``origami(n)``: a cell predictor over an ``n``-cell vertex-objective
      partition, acting with the cell's plurality action.

    With ``n`` equal to the outcome count every cell is a singleton and
    ``origami(n)`` makes exactly the ``location_predict`` decisions.  Accuracy is top-1 over
    outcomes (location) or cells (origami) and ``None`` otherwise.
    """
    strategy = Strategy.parse(strategy)
    if world.outcome_count < 2:
        raise ValueError("world needs at least two outcomes")
    if strategy.cells is not None and not 1 <= strategy.cells <= world.outcome_count:
        raise ValueError(f"origami cells must lie in 1..{world.outcome_count}")
    if train_size < 1 or test_size < 1:
        raise ValueError("train_size and test_size must be positive")
    if strategy.cells is not None:
        world_partition(world, strategy.cells)  # build once before any fan-out
    seeds = [int(s) for s in seeds]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(lambda s: _run_one(world, strategy, train_size, test_size, s), seeds))
    return [_run_one(world, strategy, train_size, test_size, s) for s in seeds]


def bayes_set_accuracy(conditionals: np.ndarray, partition: Partition) -> float:
    """Expected top-1 accuracy of the Bayes classifier over the partition's cells."""
    P = np.atleast_2d(conditionals)
    cell_of = partition.cell_index()
    Q = np.zeros((P.shape[0], len(partition)))
    np.add.at(Q.T, cell_of, P.T)
    return float(np.mean(Q.max(axis=1)))
