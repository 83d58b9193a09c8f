"""Amortized folding: a small MLP that predicts integral-objective matrices.

The network maps a flattened ``|A| x C`` loss matrix to the ``C(C-1)/2``
upper-triangular objective entries (row-major over ``i < j``).  It is
written directly in numpy with hand-derived backpropagation.
"""

from __future__ import annotations

import json
import logging
import time
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from origami.objectives import (
    IntegralObjective,
    ObjectiveMatrix,
    VertexObjective,
    all_pair_means,
    find_best_fold,
    pair_indices,
)
from origami.simplex import as_loss, sample_simplex

log = logging.getLogger(__name__)

MODEL_FORMAT = "origami-surrogate"
MODEL_VERSION = 1
HIDDEN_LAYERS = (64, 64, 64, 64)


class ShapeMismatch(ValueError):
    pass


class TrainingDiverged(FloatingPointError):
    pass


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def pair_count(C: int) -> int:
    return C * (C - 1) // 2


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 128
    optimizer: str = "adam"  # or "sgd_momentum"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    beta2: float = 0.999
    lr_decay: float = 0.005  # lr / (1 + decay * epoch)
    rel_floor: float = 1e-8
    divergence_factor: float = 1e6  # epoch loss this many times the first epoch's counts as divergence
    val_fraction: float = 0.1
    test_fraction: float = 0.1


@dataclass
class SurrogateModel:
    action_count: int
    outcome_count: int
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    input_shift: float = 0.5
    input_scale: float = 2.0
    output_scale: float = 1.0
    metadata: Dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.action_count * self.outcome_count

    @property
    def output_dim(self) -> int:
        return pair_count(self.outcome_count)

    @classmethod
    def initialize(cls, action_count: int, outcome_count: int, seed=0, hidden=HIDDEN_LAYERS) -> "SurrogateModel":
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        sizes = [action_count * outcome_count, *hidden, pair_count(outcome_count)]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(action_count, outcome_count, weights, biases)

    def _inputs(self, L) -> np.ndarray:
        X = np.asarray(L, dtype=float)
        if X.ndim == 2 and X.shape == (self.action_count, self.outcome_count):
            X = X.reshape(1, -1)
        elif X.ndim == 3:
            X = X.reshape(X.shape[0], -1)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ShapeMismatch(
                f"model expects {self.action_count}x{self.outcome_count} loss matrices, got shape {np.shape(L)}"
            )
        return (X - self.input_shift) * self.input_scale

    def forward(self, X: np.ndarray, keep: bool = False):
        """Raw network output on preprocessed inputs; optionally the activations."""
        acts = [X]
        pre = []
        h = X
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            if k < last:
                pre.append(z)
                h = softplus(z)
                acts.append(h)
            else:
                h = z
        return (h, acts, pre) if keep else h

    def predict(self, L) -> np.ndarray:
        """Objective entries for one matrix (1-d) or a batch (2-d, one row each)."""
        single = np.ndim(L) == 2 and np.shape(L) == (self.action_count, self.outcome_count)
        out = self.forward(self._inputs(L)) * self.output_scale
        return out[0] if single else out

    def parameters(self) -> List[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "action_count": self.action_count,
            "outcome_count": self.outcome_count,
            "layer_sizes": [self.input_dim] + [w.shape[1] for w in self.weights],
            "activation": "softplus",
            "input_shift": self.input_shift,
            "input_scale": self.input_scale,
            "output_scale": self.output_scale,
            "metadata": self.metadata,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SurrogateModel":
        if data.get("format") != MODEL_FORMAT or data.get("version") != MODEL_VERSION:
            raise ValueError("not a version-1 surrogate model file")
        return cls(
            int(data["action_count"]),
            int(data["outcome_count"]),
            [np.array(w, dtype=float) for w in data["weights"]],
            [np.array(b, dtype=float) for b in data["biases"]],
            float(data["input_shift"]),
            float(data["input_scale"]),
            float(data["output_scale"]),
            dict(data.get("metadata", {})),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "SurrogateModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def relative_mse(pred: np.ndarray, target: np.ndarray, floor: float = 1e-8) -> float:
    denom = np.maximum((target ** 2).sum(axis=1), floor)
    return float(np.mean(((pred - target) ** 2).sum(axis=1) / denom))


def loss_and_grads(model: SurrogateModel, X: np.ndarray, T: np.ndarray, floor: float = 1e-8):
    """Relative MSE of the raw outputs against ``T`` and its gradients.

    ``X`` is preprocessed input, ``T`` is the target already divided by the
    model's output scale.  Gradients come back in :meth:`parameters` order.
    """
    Y, acts, pre = model.forward(X, keep=True)
    n = X.shape[0]
    denom = np.maximum((T ** 2).sum(axis=1, keepdims=True), floor)
    diff = Y - T
    loss = float(np.mean((diff ** 2).sum(axis=1, keepdims=True) / denom))
    delta = 2.0 * diff / (denom * n)
    layers = len(model.weights)
    dW, db = [None] * layers, [None] * layers
    for k in range(layers - 1, -1, -1):
        dW[k] = acts[k].T @ delta
        db[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ model.weights[k].T) * sigmoid(pre[k - 1])
    return loss, [g for pair in zip(dW, db) for g in pair]


def numerical_grads(model: SurrogateModel, X: np.ndarray, T: np.ndarray, step: float = 1e-5,
                    floor: float = 1e-8) -> List[np.ndarray]:
    """Central finite differences of :func:`loss_and_grads`'s loss."""
    out = []
    for param in model.parameters():
        g = np.zeros_like(param)
        flat, gflat = param.reshape(-1), g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = loss_and_grads(model, X, T, floor)[0]
            flat[idx] = orig - step
            down = loss_and_grads(model, X, T, floor)[0]
            flat[idx] = orig
            gflat[idx] = (up - down) / (2 * step)
        out.append(g)
    return out


# ----------------------------------------------------------------------
# datasets


@dataclass
class SurrogateDataset:
    action_count: int
    outcome_count: int
    inputs: np.ndarray  # (n, |A| * C), flattened row-major loss matrices
    targets: np.ndarray  # (n, C(C-1)/2)
    config: Dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.inputs.shape[0]
        if self.inputs.shape != (n, self.action_count * self.outcome_count):
            raise ShapeMismatch(f"inputs have shape {self.inputs.shape}")
        if self.targets.shape != (n, pair_count(self.outcome_count)):
            raise ShapeMismatch(f"targets have shape {self.targets.shape}")

    def __len__(self):
        return self.inputs.shape[0]

    def loss_matrix(self, k: int) -> np.ndarray:
        return self.inputs[k].reshape(self.action_count, self.outcome_count)

    def subset(self, idx) -> "SurrogateDataset":
        return SurrogateDataset(self.action_count, self.outcome_count, self.inputs[idx], self.targets[idx], self.config)

    def split(self, seed=0, val_fraction: float = 0.1, test_fraction: float = 0.1):
        """Seeded ``(train, val, test)`` split."""
        n = len(self)
        order = np.random.default_rng(seed).permutation(n)
        n_test = int(round(n * test_fraction))
        n_val = int(round(n * val_fraction))
        test, val, train = order[:n_test], order[n_test:n_test + n_val], order[n_test + n_val:]
        return self.subset(np.sort(train)), self.subset(np.sort(val)), self.subset(np.sort(test))

    def save(self, path) -> None:
        header = json.dumps({"format": "origami-dataset", "version": 1, "action_count": self.action_count,
                             "outcome_count": self.outcome_count, "config": self.config})
        arrays = {"header": np.array(header), "inputs": self.inputs, "targets": self.targets}
        # fixed member timestamps keep the file byte-identical across runs
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            for name, arr in arrays.items():
                info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
                with zf.open(info, "w", force_zip64=True) as fh:
                    np.lib.format.write_array(fh, np.asarray(arr), allow_pickle=False)

    @classmethod
    def load(cls, path) -> "SurrogateDataset":
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            return cls(header["action_count"], header["outcome_count"], data["inputs"].copy(),
                       data["targets"].copy(), header.get("config", {}))


def generate_surrogate_dataset(action_count: int, outcome_count: int, example_count: int,
                               mc_particles: int = 1000, seed=0, canary: bool = False) -> SurrogateDataset:
    """Uniform ``[0, 1]`` loss matrices labelled by the Monte Carlo integral objective.

    Example ``k`` draws from its own substream ``(seed, k)``, so examples can
    be generated in any order.  With ``canary`` the first example gets a
    duplicated column (outcome 1 copies outcome 0).
    """
    if example_count < 1:
        raise ValueError("example_count must be positive")
    if outcome_count < 2 or action_count < 1:
        raise ValueError("need at least one action and two outcomes")
    inputs = np.empty((example_count, action_count * outcome_count))
    targets = np.empty((example_count, pair_count(outcome_count)))
    for k in range(example_count):
        rng = np.random.default_rng([seed, k])
        L = rng.random((action_count, outcome_count))
        if canary and k == 0:
            L[:, 1] = L[:, 0]
        P = sample_simplex(mc_particles, outcome_count, rng)
        inputs[k] = L.reshape(-1)
        targets[k] = all_pair_means(L, P)
    config = {"distribution": "uniform[0,1]", "mc_particles": mc_particles, "seed": seed,
              "extension": "worst_case", "canary": canary}
    return SurrogateDataset(action_count, outcome_count, inputs, targets, config)


# ----------------------------------------------------------------------
# training


class TrainingRun(NamedTuple):
    model: SurrogateModel
    train_loss: float
    val_loss: float
    history: Dict[str, List[float]]


def smoothed_nonincreasing(losses: Sequence[float], window: int = 10, slack: float = 1e-12) -> bool:
    """Whether the moving average of ``losses`` never goes up."""
    losses = np.asarray(losses, dtype=float)
    if losses.size < window + 1:
        return True
    avg = np.convolve(losses, np.ones(window) / window, mode="valid")
    return bool(np.all(np.diff(avg) <= slack * np.maximum(1.0, np.abs(avg[:-1]))))


def train_surrogate(dataset: SurrogateDataset, epochs: Optional[int] = None, config: Optional[TrainConfig] = None,
                    seed=0, validation: Optional[SurrogateDataset] = None) -> TrainingRun:
    """Fit a fresh model to ``dataset`` by minibatch Adam (or SGD with momentum).

    Without an explicit ``validation`` set the data is split by ``seed``
    and the test share is held out untouched.
    """
    config = config or TrainConfig()
    if epochs is not None:
        config = TrainConfig(**{**asdict(config), "epochs": epochs})
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if validation is None and len(dataset) >= 10:
        train, validation, _ = dataset.split(seed, config.val_fraction, config.test_fraction)
    else:
        train = dataset
    A, C = dataset.action_count, dataset.outcome_count
    model = SurrogateModel.initialize(A, C, seed=[seed, 1])
    scale = float(np.sqrt(np.mean(train.targets ** 2)))
    model.output_scale = scale if scale > 0 else 1.0

    X = model._inputs(train.inputs)
    T = train.targets / model.output_scale
    if validation is not None:
        Xv = model._inputs(validation.inputs)
        Tv = validation.targets / model.output_scale
    rng = np.random.default_rng([seed, 2])
    params = model.parameters()
    if config.optimizer not in ("sgd_momentum", "adam"):
        raise ValueError(f"unknown optimizer {config.optimizer!r}")
    velocity = [np.zeros_like(p) for p in params]
    second = [np.zeros_like(p) for p in params]
    updates = 0
    history = {"train_loss": [], "val_loss": []}
    n = X.shape[0]
    for epoch in range(config.epochs):
        lr = config.learning_rate / (1.0 + config.lr_decay * epoch)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = loss_and_grads(model, X[batch], T[batch], config.rel_floor)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}, batch starting {start}")
            total += loss * batch.size
            updates += 1
            if config.optimizer == "adam":
                c1 = 1.0 - config.momentum ** updates
                c2 = 1.0 - config.beta2 ** updates
                for p, m, s2, g in zip(params, velocity, second, grads):
                    m *= config.momentum
                    m += (1.0 - config.momentum) * g
                    s2 *= config.beta2
                    s2 += (1.0 - config.beta2) * g * g
                    p -= lr * (m / c1) / (np.sqrt(s2 / c2) + 1e-8)
            else:
                for p, v, g in zip(params, velocity, grads):
                    v *= config.momentum
                    v -= lr * g
                    p += v
        history["train_loss"].append(total / n)
        if total / n > config.divergence_factor * max(history["train_loss"][0], config.rel_floor):
            raise TrainingDiverged(f"training loss grew to {total / n:.3e} by epoch {epoch}")
        if validation is not None:
            history["val_loss"].append(relative_mse(model.forward(Xv), Tv, config.rel_floor))
    train_loss = relative_mse(model.forward(X), T, config.rel_floor)
    if not np.isfinite(train_loss):
        raise TrainingDiverged(f"final training loss is {train_loss}")
    val_loss = history["val_loss"][-1] if history["val_loss"] else float("nan")
    model.metadata = {
        "seed": seed if isinstance(seed, int) else list(seed),
        "epochs": config.epochs,
        "train_config": asdict(config),
        "activation": "softplus",
        "init": "glorot_uniform",
        "optimizer": config.optimizer,
        "train_examples": int(n),
        "dataset": dataset.config,
        "final_train_loss": train_loss,
        "final_val_loss": val_loss,
        "smoothed_monotone": smoothed_nonincreasing(history["train_loss"]),
    }
    if not model.metadata["smoothed_monotone"]:
        log.warning("training loss moving average increased at some epoch")
    return TrainingRun(model, train_loss, val_loss, history)


def evaluate_surrogate(model: SurrogateModel, dataset: SurrogateDataset) -> dict:
    """Argmin-recovery accuracy and errors on ``dataset``."""
    if (dataset.action_count, dataset.outcome_count) != (model.action_count, model.outcome_count):
        raise ShapeMismatch("dataset and model shapes differ")
    pred = model.predict(dataset.inputs)
    hits = np.argmin(pred, axis=1) == np.argmin(dataset.targets, axis=1)
    return {
        "outcome_count": model.outcome_count,
        "examples": len(dataset),
        "accuracy": float(hits.mean()),
        "rmse": float(np.sqrt(np.mean((pred - dataset.targets) ** 2))),
        "relative_mse": relative_mse(pred, dataset.targets),
    }


def surrogate_objective_matrix(model: SurrogateModel, L) -> ObjectiveMatrix:
    """One forward pass placed into the upper triangle."""
    L = as_loss(L)
    if L.shape != (model.action_count, model.outcome_count):
        raise ShapeMismatch(f"model is for {model.action_count}x{model.outcome_count}, got {L.shape}")
    return ObjectiveMatrix.from_pairs(model.outcome_count, model.predict(L))


@dataclass(frozen=True)
class SurrogateObjective:
    """Surrogate scores while the folded matrix still has the model's shape, vertex scores after."""

    model: SurrogateModel
    kind = "surrogate"

    def matrix(self, L, ext="worst_case", step: int = 0, jobs: int = 1) -> ObjectiveMatrix:
        L = as_loss(L)
        if L.shape == (self.model.action_count, self.model.outcome_count):
            return surrogate_objective_matrix(self.model, L)
        return VertexObjective().matrix(L, ext, step, jobs)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "action_count": self.model.action_count,
                "outcome_count": self.model.outcome_count}


# ----------------------------------------------------------------------
# latency


def bench_fold_latency(action_count: int, outcome_counts: Sequence[int], methods: Sequence[str],
                       repeats: int = 50, seed=0, models: Optional[Dict[int, SurrogateModel]] = None,
                       integral_samples: int = 1000) -> List[dict]:
    """Median wall-clock seconds of one fold decision per method and ``C``."""
    models = models or {}
    rows = []
    for C in outcome_counts:
        rng = np.random.default_rng([seed, C])
        mats = rng.random((repeats, action_count, C))
        for method in methods:
            if method == "vertex":
                objective = VertexObjective()
            elif method == "integral":
                objective = IntegralObjective(integral_samples, seed)
            elif method == "surrogate":
                if C not in models:
                    raise ValueError(f"no surrogate model for C={C}")
                objective = SurrogateObjective(models[C])
            else:
                raise ValueError(f"unknown method {method!r}")
            find_best_fold(mats[0], objective)  # warm-up
            times = []
            for L in mats:
                t0 = time.perf_counter()
                find_best_fold(L, objective)
                times.append(time.perf_counter() - t0)
            rows.append({"outcome_count": C, "method": method, "median_seconds": float(np.median(times)),
                         "repeats": repeats})
    return rows
