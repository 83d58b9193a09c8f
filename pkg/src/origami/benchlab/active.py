"""Pool-based active learning on a Gaussian-mixture classification task.

An ensemble of softmax classifiers is retrained every round on the labelled
set; the acquisition rule then picks which classes the next batch is drawn
from.  Classes differ in difficulty: some means sit in tight clusters of
confusable classes, others are isolated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from origami.benchlab.predictors import TabularPredictor
from origami.folding import StopRule, run_origami
from origami.objectives import VertexObjective
from origami.simplex import h_entropy


@dataclass
class ActiveConfig:
    feature_dim: int = 8
    cluster_count: int = 5  # classes are grouped around this many centres
    cluster_spread: float = 4.0
    hard_spread: float = 0.6  # offset of classes inside a hard cluster
    easy_spread: float = 2.5
    hard_fraction: float = 0.5
    pool_per_class: int = 150
    val_per_class: int = 20
    test_per_class: int = 60
    rounds: int = 30
    batch: int = 10
    initial_batch: Optional[int] = None  # defaults to batch
    origami_cells: int = 5
    class_loss: str = "nll"  # "nll" (cross-entropy) or "error" (0-1)
    l2: float = 1e-2


@dataclass
class ClassificationTask:
    class_count: int
    means: np.ndarray
    pool_x: np.ndarray
    pool_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray


def make_task(class_count: int, config: ActiveConfig, seed) -> ClassificationTask:
    rng = np.random.default_rng(seed)
    d = config.feature_dim
    clusters = max(1, min(config.cluster_count, class_count))
    centres = config.cluster_spread * rng.standard_normal((clusters, d))
    hard = rng.random(clusters) < config.hard_fraction
    owner = np.arange(class_count) % clusters
    spread = np.where(hard[owner], config.hard_spread, config.easy_spread)
    means = centres[owner] + spread[:, None] * rng.standard_normal((class_count, d))

    def draw(per_class):
        y = np.repeat(np.arange(class_count), per_class)
        return means[y] + rng.standard_normal((y.size, d)), y

    pool_x, pool_y = draw(config.pool_per_class)
    val_x, val_y = draw(config.val_per_class)
    test_x, test_y = draw(config.test_per_class)
    return ClassificationTask(class_count, means, pool_x, pool_y, val_x, val_y, test_x, test_y)


@dataclass(frozen=True)
class Acquisition:
    kind: str
    n: Optional[int] = None

    @classmethod
    def parse(cls, text) -> "Acquisition":
        if isinstance(text, Acquisition):
            return text
        text = str(text).strip()
        if text in ("random", "origami"):
            return cls(text)
        m = re.fullmatch(r"worst[_-]?n?[(:_ -]?(\d+)\)?", text)
        if not m:
            raise ValueError(f"unknown acquisition {text!r}")
        return cls("worst_n", int(m.group(1)))

    def __str__(self):
        return self.kind if self.n is None else f"worst_{self.n}"


@dataclass
class ActiveRun:
    acquisition: str
    seed: int
    accuracy: float
    bottom_quartile_accuracy: float
    class_accuracy: np.ndarray
    labelled: int


class Ensemble:
    def __init__(self, models: List[TabularPredictor]):
        self.models = models

    def member_proba(self, X) -> np.ndarray:
        return np.stack([m.predict_proba(X) for m in self.models])

    def predict_proba(self, X) -> np.ndarray:
        return self.member_proba(X).mean(axis=0)


def fit_ensemble(X, y, class_count: int, model_count: int, rng: np.random.Generator, l2: float) -> Ensemble:
    """Bootstrap-resampled softmax classifiers over all ``class_count`` classes."""
    models = []
    for _ in range(model_count):
        idx = rng.integers(len(y), size=len(y)) if model_count > 1 else np.arange(len(y))
        models.append(TabularPredictor(class_count, l2=l2).fit(X[idx], y[idx]))
    return Ensemble(models)


def class_accuracy(pred: np.ndarray, y: np.ndarray, class_count: int) -> np.ndarray:
    hits = np.bincount(y, weights=(pred == y).astype(float), minlength=class_count)
    counts = np.bincount(y, minlength=class_count)
    return np.divide(hits, counts, out=np.zeros(class_count), where=counts > 0)


def bottom_quartile(acc: np.ndarray) -> float:
    k = max(1, int(np.ceil(acc.size / 4)))
    return float(np.mean(np.sort(acc)[:k]))


def model_class_loss(ensemble: Ensemble, X, y, class_count: int, kind: str = "error") -> np.ndarray:
    """Loss matrix with one row per model: mean loss on each class.

    ``kind`` is ``error`` (misclassification rate) or ``nll`` (cross-entropy).
    """
    probs = ensemble.member_proba(X)
    if kind == "error":
        per_example = (probs.argmax(axis=2) != y).astype(float)
    elif kind == "nll":
        per_example = -np.log(np.clip(probs[:, np.arange(len(y)), y], 1e-12, None))
    else:
        raise ValueError(f"unknown class loss {kind!r}")
    counts = np.maximum(np.bincount(y, minlength=class_count), 1)
    return np.stack([np.bincount(y, weights=row, minlength=class_count) / counts for row in per_example])


def origami_target_classes(ensemble: Ensemble, task: ClassificationTask, cells: int,
                           class_loss: str = "error") -> np.ndarray:
    """Classes of the cell with the highest validation-average H-entropy."""
    K = task.class_count
    L = model_class_loss(ensemble, task.val_x, task.val_y, K, class_loss)
    partition = run_origami(L, VertexObjective(), "worst_case", StopRule.target_cells(min(cells, K))).partition
    H = h_entropy(L, ensemble.predict_proba(task.val_x))
    cell_of = partition.cell_index()[task.val_y]
    totals = np.bincount(cell_of, weights=H, minlength=len(partition))
    counts = np.maximum(np.bincount(cell_of, minlength=len(partition)), 1)
    top = int(np.argmax(totals / counts))
    return np.asarray(partition.cells[top])


def _acquire(rule: Acquisition, ensemble: Ensemble, task: ClassificationTask, available: np.ndarray,
             batch: int, config: ActiveConfig, rng: np.random.Generator) -> np.ndarray:
    K = task.class_count
    if rule.kind == "random":
        allowed = None
    elif rule.kind == "worst_n":
        acc = class_accuracy(ensemble.predict_proba(task.val_x).argmax(axis=1), task.val_y, K)
        allowed = np.argsort(acc, kind="stable")[:min(rule.n, K)]
    else:
        allowed = origami_target_classes(ensemble, task, config.origami_cells, config.class_loss)
    candidates = np.flatnonzero(available)
    if allowed is not None:
        focused = candidates[np.isin(task.pool_y[candidates], allowed)]
        if focused.size:
            candidates = focused
    take = min(batch, candidates.size)
    return rng.choice(candidates, size=take, replace=False)


def _run_one(class_count: int, model_count: int, rule: Acquisition, config: ActiveConfig, seed: int) -> ActiveRun:
    task = make_task(class_count, config, [seed, 0])
    rng = np.random.default_rng([seed, 1])
    available = np.ones(task.pool_y.size, dtype=bool)
    first = rng.choice(task.pool_y.size, size=config.initial_batch or config.batch, replace=False)
    available[first] = False
    for _ in range(config.rounds):
        labelled = ~available
        ensemble = fit_ensemble(task.pool_x[labelled], task.pool_y[labelled], class_count, model_count, rng, config.l2)
        chosen = _acquire(rule, ensemble, task, available, config.batch, config, rng)
        available[chosen] = False
    labelled = ~available
    ensemble = fit_ensemble(task.pool_x[labelled], task.pool_y[labelled], class_count, model_count, rng, config.l2)
    pred = ensemble.predict_proba(task.test_x).argmax(axis=1)
    per_class = class_accuracy(pred, task.test_y, class_count)
    return ActiveRun(str(rule), int(seed), float(np.mean(pred == task.test_y)), bottom_quartile(per_class),
                     per_class, int(labelled.sum()))


def check_budget(class_count: int, config: ActiveConfig) -> None:
    """Reject batch settings that would label more examples than the pool holds."""
    if config.batch < 1 or config.rounds < 0:
        raise ValueError("batch must be positive and rounds non-negative")
    pool = class_count * config.pool_per_class
    if (config.initial_batch or config.batch) + config.rounds * config.batch > pool:
        raise ValueError(f"acquisitions exceed the pool of {pool} examples")


def simulate_active_learning(class_count: int = 20, model_count: int = 3, acquisition="origami",
                             rounds: Optional[int] = None, batch: Optional[int] = None,
                             seeds: Sequence[int] = (0,), config: Optional[ActiveConfig] = None) -> List[ActiveRun]:
    """Final test accuracy after ``rounds`` acquisitions, one run per seed.

    The task, the initial batch and the bootstrap draws depend only on the
    seed, so runs with different acquisition rules are paired.
    """
    if class_count < 1 or model_count < 1:
        raise ValueError("class_count and model_count must be positive")
    config = config or ActiveConfig()
    if rounds is not None or batch is not None:
        config = replace(config, rounds=config.rounds if rounds is None else rounds,
                         batch=config.batch if batch is None else batch)
    check_budget(class_count, config)
    rule = Acquisition.parse(acquisition)
    return [_run_one(class_count, model_count, rule, config, int(s)) for s in seeds]
