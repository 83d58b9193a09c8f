"""Command-line entry point: ``origami <command> [options]``.

Commands
--------
fold       fold a loss matrix and write the tree, partition and folded loss
gap        H-entropy gap of a fold tree over a probe sample
inspect    objective matrix and best next fold of a loss matrix
surrogate  train / eval / bench the learned objective
bench      pipeline / active / oracle benchmark reports

Every command writes ``manifest.json`` into ``--out`` (also on failure).
The manifest and all result files depend only on the inputs and the
resolved configuration; wall-clock figures and the parallelism degree go
to ``timings.json``.

Exit codes: 0 success, 2 input error, 3 configuration error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from origami import __version__
from origami import io as oio
from origami.folding import FoldTree, StopRule, StopRuleError, partition_entropy, run_origami, cumulative_gap
from origami.lp import LPError
from origami.objectives import IntegralObjective, MaxIncreaseObjective, VertexObjective
from origami.simplex import DimensionError, SetExtension, argmin_action, sample_simplex

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4
MANIFEST_SCHEMA = 1


class ConfigError(ValueError):
    pass


class SeedFailures(RuntimeError):
    """Some benchmark seeds failed; the rest of the results were written."""


# ----------------------------------------------------------------------
# configuration


COMMON_DEFAULTS = {"seed": None, "jobs": 1, "out": None}

FOLD_DEFAULTS = {
    "loss": None, "objective": "vertex", "mc_samples": 1000, "ccp_restarts": 5, "extension": "worst-case",
    "cells": None, "folds": None, "gap_tol": None, "probe": None, "probe_size": 10000, "model": None,
}

DEFAULTS: Dict[str, dict] = {
    "fold": FOLD_DEFAULTS,
    "inspect": FOLD_DEFAULTS,
    "gap": {"loss": None, "tree": None, "extension": "worst-case", "probe": None, "probe_size": 10000,
            "steps": None, "csv": False},
    "surrogate train": {"actions": 2, "outcomes": 3, "examples": 10000, "mc_samples": 1000, "epochs": 500,
                        "dataset": None, "learning_rate": 1e-3, "batch_size": 128, "optimizer": "adam",
                        "save_dataset": False},
    "surrogate eval": {"model": None, "examples": 1000, "mc_samples": 1000},
    "surrogate bench": {"model": None, "outcome_counts": [3, 4, 5, 6, 7, 8], "methods": ["surrogate", "vertex", "integral"],
                        "repeats": 50, "actions": 2, "mc_samples": 1000},
    "bench pipeline": {"grid_size": 20, "world_seed": 0, "train_size": 60, "test_size": 200,
                       "strategies": ["random_action", "direct_policy", "location_predict", "location_expected",
                                      "origami(5)", "origami(10)"],
                       "seeds": list(range(20))},
    "bench active": {"class_count": 20, "model_count": 3, "rounds": 30, "batch": 10,
                     "acquisitions": ["random", "worst_1", "worst_3", "origami"], "origami_cells": 5,
                     "seeds": list(range(20))},
    "bench oracle": {"actions": 2, "outcomes": 3, "instances": 20, "mc_samples": 100000, "step": 0.005,
                     "extension": "worst-case"},
}


def _seed_fallback() -> int:
    raw = os.environ.get("ORIGAMI_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"ORIGAMI_SEED must be an integer, got {raw!r}") from None


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return {k.replace("-", "_"): v for k, v in data.items()}


@dataclass
class RunConfig:
    """Resolved settings of one command: defaults, then config file, then flags."""

    command: str
    settings: dict = field(default_factory=dict)
    jobs: int = 1
    out: Optional[Path] = None

    @classmethod
    def resolve(cls, command: str, flags: dict) -> "RunConfig":
        defaults = {**DEFAULTS[command], **COMMON_DEFAULTS}
        merged = dict(defaults)
        config_path = flags.pop("config", None)
        if config_path is not None:
            file_values = load_config_file(config_path)
            unknown = sorted(set(file_values) - set(defaults))
            if unknown:
                raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
            merged.update(file_values)
        merged.update({k: v for k, v in flags.items() if v is not None})
        if merged["seed"] is None:
            merged["seed"] = _seed_fallback()
        try:
            merged["seed"] = int(merged["seed"])
            jobs = int(merged.pop("jobs"))
        except (TypeError, ValueError):
            raise ConfigError("seed and jobs must be integers") from None
        if jobs < 1:
            raise ConfigError("jobs must be at least 1")
        out = merged.pop("out")
        return cls(command, merged, jobs, Path(out) if out is not None else None)

    def __getitem__(self, key):
        return self.settings[key]

    def to_dict(self) -> dict:
        return {"command": self.command, **{k: _jsonable(v) for k, v in sorted(self.settings.items())}}


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


# ----------------------------------------------------------------------
# run bookkeeping


class Run:
    """Output directory, file list and timings of one command."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = cfg.out
        self.outputs: List[str] = []
        self.inputs: Dict[str, dict] = {}
        self.timings: Dict[str, float] = {}
        self.started = time.perf_counter()
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def record_input(self, key: str, path) -> None:
        path = Path(path)
        digest = hashlib.sha256(path.read_bytes()).hexdigest() if path.is_file() else None
        self.inputs[key] = {"name": path.name, "sha256": digest}

    def path(self, name: str) -> Optional[Path]:
        if self.out is None:
            return None
        if name not in self.outputs:
            self.outputs.append(name)
        return self.out / name

    def write_text(self, name: str, text: str) -> None:
        p = self.path(name)
        if p is not None:
            oio.write_text(p, text)

    def write_json(self, name: str, data) -> None:
        self.write_text(name, oio.dumps(data))

    def figure(self, name: str, render: Callable[[Path], object]) -> None:
        p = self.path(name)
        if p is not None:
            render(p)

    def timed(self, key: str):
        run = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[key] = time.perf_counter() - self.t0
                return False

        return _Timer()

    def finish(self, code: int, error: Optional[str]) -> None:
        if self.out is None:
            return
        manifest = {
            "schema_version": MANIFEST_SCHEMA,
            "version": __version__,
            "config": self.cfg.to_dict(),
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
            "status": "ok" if code == EXIT_OK else "error",
            "exit_code": code,
        }
        if error is not None:
            manifest["error"] = error
        oio.write_json(self.out / "manifest.json", manifest)
        self.timings["total"] = time.perf_counter() - self.started
        oio.write_json(self.out / "timings.json", {"jobs": self.cfg.jobs,
                                                   "seconds": {k: round(v, 6) for k, v in self.timings.items()}})


# ----------------------------------------------------------------------
# shared helpers


def _extension(cfg: RunConfig) -> SetExtension:
    try:
        return SetExtension.parse(cfg["extension"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _load_loss(cfg: RunConfig, run: Run):
    if cfg["loss"] is None:
        raise ConfigError("--loss is required")
    L = oio.read_loss(cfg["loss"])
    run.record_input("loss", cfg["loss"])
    return L


def _probe(cfg: RunConfig, run: Run, C: int) -> np.ndarray:
    if cfg["probe"] is not None:
        run.record_input("probe", cfg["probe"])
        return oio.read_probe(cfg["probe"], C)
    size = int(cfg["probe_size"])
    if size < 1:
        raise ConfigError("probe_size must be positive")
    return sample_simplex(size, C, [cfg["seed"], 1])


def _objective(cfg: RunConfig, run: Run):
    kind = str(cfg["objective"]).replace("_", "-")
    if kind == "vertex":
        return VertexObjective()
    if kind == "integral":
        return IntegralObjective(samples=int(cfg["mc_samples"]), seed=cfg["seed"])
    if kind == "max-increase":
        return MaxIncreaseObjective(restarts=int(cfg["ccp_restarts"]), seed=cfg["seed"])
    if kind == "surrogate":
        from origami.surrogate import SurrogateModel, SurrogateObjective
        if cfg["model"] is None:
            raise ConfigError("--objective surrogate needs --model")
        run.record_input("model", cfg["model"])
        return SurrogateObjective(_load_model(cfg["model"]))
    raise ConfigError(f"unknown objective {cfg['objective']!r}")


def _load_model(path):
    from origami.surrogate import SurrogateModel
    try:
        return SurrogateModel.load(path)
    except OSError as exc:
        raise oio.InputError(exc.strerror or str(exc), path) from None
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise oio.InputError(f"invalid model file: {exc}", path) from None


def _stop_rule(cfg: RunConfig, run: Run, C: int) -> StopRule:
    given = [k for k in ("cells", "folds", "gap_tol") if cfg[k] is not None]
    if len(given) > 1:
        raise ConfigError("use only one of --cells, --folds, --gap-tol")
    if not given:
        return StopRule.target_cells(1)
    key = given[0]
    try:
        if key == "cells":
            return StopRule.target_cells(int(cfg["cells"]))
        if key == "folds":
            return StopRule.fold_count(int(cfg["folds"]))
        return StopRule.gap_tolerance(float(cfg["gap_tol"]), probe=_probe(cfg, run, C))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, oio.InputError):
            raise
        raise ConfigError(str(exc)) from None


def _parse_int_list(text) -> List[int]:
    """``"0:20"`` (half-open range), ``"1,3,5"`` or a JSON list."""
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    text = str(text).strip()
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return list(range(int(lo), int(hi)))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse integer list {text!r}") from None


def _parse_str_list(text) -> List[str]:
    if isinstance(text, (list, tuple)):
        return [str(x) for x in text]
    return [x.strip() for x in str(text).split(",") if x.strip()]


# ----------------------------------------------------------------------
# commands


def cmd_fold(cfg: RunConfig, run: Run) -> int:
    lm = _load_loss(cfg, run)
    L = lm.entries
    ext = _extension(cfg)
    objective = _objective(cfg, run)
    stop = _stop_rule(cfg, run, L.shape[1])
    try:
        stop.max_folds(L.shape[1])
    except StopRuleError as exc:
        raise ConfigError(str(exc)) from None
    with run.timed("fold"):
        result = run_origami(L, objective, ext, stop, seed=cfg["seed"], jobs=cfg.jobs)
    tree, partition = result.tree, result.partition
    labels = lm.outcomes
    run.write_json("tree.json", tree.to_dict())
    pdata = partition.to_dict()
    if labels is not None:
        pdata["outcome_names"] = [[labels[k] for k in cell] for cell in partition.cells]
    run.write_json("partition.json", pdata)
    cell_names = ["+".join(str(labels[k]) if labels else str(k) for k in cell) for cell in partition.cells]
    run.write_text("folded_loss.csv", oio.loss_to_csv(result.folded_loss, lm.actions, cell_names))
    merges = [{"step": m.step, "source": m.source, "target": m.target, "objective": m.objective}
              for m in tree.merges]
    run.write_text("merges.csv", oio.rows_to_csv(merges, ["step", "source", "target", "objective"]))
    if merges:
        from origami import plotting

        def render(path):
            import matplotlib.pyplot as plt
            fig, ax = plt.subplots(figsize=(6.4, 3.6))
            ax.plot([m["step"] for m in merges], [m["objective"] for m in merges], marker=".")
            ax.set_xlabel("fold step")
            ax.set_ylabel("selected objective value")
            fig.tight_layout()
            plotting.save_figure(fig, path)

        run.figure("merges.png", render)
    print(f"{len(tree.merges)} folds, {len(partition)} cells")
    for cell in cell_names:
        print(f"  {{{cell}}}")
    return EXIT_OK


def cmd_inspect(cfg: RunConfig, run: Run) -> int:
    lm = _load_loss(cfg, run)
    L = lm.entries
    ext = _extension(cfg)
    objective = _objective(cfg, run)
    with run.timed("objective"):
        M = objective.matrix(L, ext, 0, cfg.jobs)
    best = M.argmin() if L.shape[1] > 1 else None
    vertex_h = L.min(axis=0)
    info = {
        "action_count": int(L.shape[0]),
        "outcome_count": int(L.shape[1]),
        "objective": objective.to_dict(),
        "extension": ext.value,
        "best_fold": None if best is None else {"source": best.source, "target": best.target,
                                                "value": float(M.entries[best.source, best.target])},
        "vertex_entropy": [float(v) for v in vertex_h],
        "uniform_entropy": float((L @ np.full(L.shape[1], 1.0 / L.shape[1])).min()),
        "uniform_action": int(argmin_action(L, np.full(L.shape[1], 1.0 / L.shape[1]))),
    }
    run.write_json("inspect.json", info)
    run.write_text("objective.csv", M.to_csv())
    print(f"loss matrix: {L.shape[0]} actions x {L.shape[1]} outcomes")
    print(M.to_csv(), end="")
    if best is not None:
        print(f"best fold: {best} ({info['best_fold']['value']!r})")
    return EXIT_OK


def cmd_gap(cfg: RunConfig, run: Run) -> int:
    lm = _load_loss(cfg, run)
    L = lm.entries
    if cfg["tree"] is None:
        raise ConfigError("--tree is required")
    tree = oio.read_tree(cfg["tree"])
    run.record_input("tree", cfg["tree"])
    if tree.leaf_count != L.shape[1]:
        raise oio.InputError(f"tree has {tree.leaf_count} leaves but the loss matrix has {L.shape[1]} outcomes",
                             cfg["tree"])
    if cfg["steps"] is not None:
        steps = int(cfg["steps"])
        if not 0 <= steps <= tree.fold_count:
            raise ConfigError(f"steps must lie in 0..{tree.fold_count}")
        tree = FoldTree(tree.leaf_count, list(tree.merges[:steps]))
    ext = _extension(cfg)
    P = _probe(cfg, run, L.shape[1])
    mean = cumulative_gap(tree, L, P, ext)
    if tree.merges:
        per_point = partition_entropy(L, tree.partition().cells, P, ext) - (P @ L.T).min(axis=1)
    else:
        per_point = np.zeros(P.shape[0])
    result = {"mean_gap": mean, "max_gap": float(per_point.max()), "probe_points": int(P.shape[0]),
              "folds": tree.fold_count, "extension": ext.value}
    run.write_json("gap.json", result)
    if cfg["csv"]:
        run.write_text("gap.csv", oio.rows_to_csv([{"point": k, "gap": float(g)} for k, g in enumerate(per_point)],
                                                  ["point", "gap"]))
    print(f"mean gap {mean!r}")
    print(f"max gap  {result['max_gap']!r}")
    return EXIT_OK


def cmd_surrogate_train(cfg: RunConfig, run: Run) -> int:
    from origami import plotting
    from origami.surrogate import (SurrogateDataset, TrainConfig, evaluate_surrogate,
                                   generate_surrogate_dataset, train_surrogate)
    seed = cfg["seed"]
    if cfg["dataset"] is not None:
        try:
            data = SurrogateDataset.load(cfg["dataset"])
        except (OSError, KeyError, ValueError) as exc:
            raise oio.InputError(f"cannot read dataset: {exc}", cfg["dataset"]) from None
        run.record_input("dataset", cfg["dataset"])
    else:
        with run.timed("generate"):
            data = generate_surrogate_dataset(int(cfg["actions"]), int(cfg["outcomes"]), int(cfg["examples"]),
                                              int(cfg["mc_samples"]), seed=seed)
        if cfg["save_dataset"]:
            p = run.path("dataset.npz")
            if p is not None:
                data.save(p)
    try:
        tc = TrainConfig(epochs=int(cfg["epochs"]), learning_rate=float(cfg["learning_rate"]),
                         batch_size=int(cfg["batch_size"]), optimizer=str(cfg["optimizer"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if tc.optimizer not in ("adam", "sgd_momentum"):
        raise ConfigError(f"unknown optimizer {tc.optimizer!r}")
    test = None
    if len(data) >= 10:
        train, val, test = data.split(seed, tc.val_fraction, tc.test_fraction)
    else:
        train, val = data, None
    with run.timed("train"):
        result = train_surrogate(train, config=tc, seed=seed, validation=val)
    p = run.path("model.json")
    if p is not None:
        result.model.save(p)
    epochs = range(1, len(result.history["train_loss"]) + 1)
    curve = [{"epoch": e, "train_loss": t,
              "val_loss": result.history["val_loss"][e - 1] if result.history["val_loss"] else None}
             for e, t in zip(epochs, result.history["train_loss"])]
    run.write_text("loss_curve.csv", oio.rows_to_csv(curve, ["epoch", "train_loss", "val_loss"]))
    run.figure("loss_curve.png", lambda path: plotting.loss_curves(result.history, path))
    summary = {"train_loss": result.train_loss,
               "val_loss": None if not np.isfinite(result.val_loss) else result.val_loss,
               "test": evaluate_surrogate(result.model, test) if test is not None and len(test) else None}
    run.write_json("train.json", summary)
    print(f"train loss {result.train_loss!r}")
    if summary["test"] is not None:
        print(f"test accuracy {summary['test']['accuracy']!r}")
    return EXIT_OK


def _models(cfg: RunConfig, run: Run) -> list:
    paths = cfg["model"]
    if paths is None:
        raise ConfigError("--model is required")
    if isinstance(paths, (str, Path)):
        paths = [paths]
    models = []
    for k, p in enumerate(paths):
        models.append(_load_model(p))
        run.record_input(f"model_{k}", p)
    return models


def cmd_surrogate_eval(cfg: RunConfig, run: Run) -> int:
    from origami.surrogate import evaluate_surrogate, generate_surrogate_dataset
    rows = []
    for model in _models(cfg, run):
        data = generate_surrogate_dataset(model.action_count, model.outcome_count, int(cfg["examples"]),
                                          int(cfg["mc_samples"]), seed=[cfg["seed"], 7919])
        rows.append(evaluate_surrogate(model, data))
    rows.sort(key=lambda r: r["outcome_count"])
    cols = ["outcome_count", "examples", "accuracy", "rmse", "relative_mse"]
    run.write_text("eval.csv", oio.rows_to_csv(rows, cols))
    run.write_json("eval.json", {"results": rows})
    for r in rows:
        print(f"C={r['outcome_count']}: accuracy {r['accuracy']!r}, rmse {r['rmse']!r}")
    return EXIT_OK


def cmd_surrogate_bench(cfg: RunConfig, run: Run) -> int:
    from origami import plotting
    from origami.surrogate import bench_fold_latency
    methods = _parse_str_list(cfg["methods"])
    counts = _parse_int_list(cfg["outcome_counts"])
    models = {}
    if "surrogate" in methods:
        for m in _models(cfg, run):
            models[m.outcome_count] = m
        missing = [C for C in counts if C not in models]
        if missing:
            raise ConfigError(f"no surrogate model for C in {missing}")
    with run.timed("bench"):
        rows = bench_fold_latency(int(cfg["actions"]), counts, methods, int(cfg["repeats"]), cfg["seed"],
                                  models, int(cfg["mc_samples"]))
    # wall-clock measurements are not reproducible, so they live beside the timings
    run.write_text("latency.csv", oio.rows_to_csv(rows, ["outcome_count", "method", "median_seconds", "repeats"]))
    run.figure("latency.png", lambda path: plotting.latency_plot(rows, path))
    for r in rows:
        print(f"C={r['outcome_count']} {r['method']}: {r['median_seconds']:.3e} s")
    return EXIT_OK


def _fan_out(func, seeds: List[int], jobs: int):
    """``func(seed)`` for every seed; failures are collected, not raised."""
    def safe(seed):
        try:
            return seed, func(seed), None
        except Exception as exc:  # noqa: BLE001 - reported per seed
            return seed, None, f"{type(exc).__name__}: {exc}"

    if jobs > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(safe, seeds))
    return [safe(s) for s in seeds]


def _write_bench(run: Run, rows, pairs, failures, metrics_for_plots, order, title):
    from origami import plotting
    from origami.benchlab.report import LONG_COLUMNS, comparisons, summarize
    rows = sorted(rows, key=lambda r: (order.index(r["strategy"]), r["seed"], r["metric"]))
    summary = summarize(rows)
    run.write_text("results.csv", oio.rows_to_csv(rows, LONG_COLUMNS))
    report = {"summary": summary, "comparisons": comparisons(rows, pairs) if rows else [],
              "failures": failures}
    run.write_json("summary.json", report)
    for metric in metrics_for_plots:
        if any(metric in v for v in summary.values()):
            run.figure(f"{metric}.png", lambda path, m=metric: plotting.bar_summary(summary, m, path, title, order))
    for name in order:
        if name in summary:
            parts = [f"{m} {v['mean']:.4f}" for m, v in summary[name].items()]
            print(f"{name:>18}: " + ", ".join(parts))
    for comp in report["comparisons"]:
        print(f"{comp['better']} vs {comp['worse']} ({comp['metric']}): p = {comp['p_value']}")
    if failures:
        raise SeedFailures(f"{len(failures)} seed runs failed")
    return report


def cmd_bench_pipeline(cfg: RunConfig, run: Run) -> int:
    from origami import plotting
    from origami.benchlab.pipeline import Strategy, _run_one, world_partition
    from origami.benchlab.report import long_rows
    from origami.benchlab.world import build_synthetic_world
    world = build_synthetic_world(int(cfg["grid_size"]), seed=int(cfg["world_seed"]))
    try:
        strategies = [Strategy.parse(s) for s in _parse_str_list(cfg["strategies"])]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seeds = _parse_int_list(cfg["seeds"])
    train_size, test_size = int(cfg["train_size"]), int(cfg["test_size"])
    order = [str(s) for s in strategies]
    rows, failures = [], []
    for strategy in strategies:
        if strategy.cells is not None:
            if not 1 <= strategy.cells <= world.outcome_count:
                raise ConfigError(f"{strategy}: cell count must lie in 1..{world.outcome_count}")
            world_partition(world, strategy.cells)
        with run.timed(str(strategy)):
            results = _fan_out(lambda s: _run_one(world, strategy, train_size, test_size, s), seeds, cfg.jobs)
        for seed, rec, err in results:
            if err is not None:
                failures.append({"strategy": str(strategy), "seed": seed, "error": err})
            else:
                rows += long_rows([rec], ["decision_loss", "predict_accuracy"])
    for strategy in strategies:
        if strategy.cells is not None and strategy.cells < world.outcome_count:
            part = world_partition(world, strategy.cells)
            run.figure(f"cells_{strategy.cells}.png",
                       lambda path, p=part, n=strategy.cells: plotting.partition_map(
                           p.cell_index(), world.grid_size, path, f"{n} cells"))
    pairs = [(o, "location_predict", "decision_loss", "less") for o in order if o.startswith("origami")]
    pairs += [("location_predict", "random_action", "decision_loss", "less")]
    pairs = [p for p in pairs if p[0] in order and p[1] in order]
    _write_bench(run, rows, pairs, failures, ["decision_loss", "predict_accuracy"], order, "decision pipeline")
    return EXIT_OK


def cmd_bench_active(cfg: RunConfig, run: Run) -> int:
    from origami.benchlab.active import Acquisition, ActiveConfig, _run_one, check_budget
    from origami.benchlab.report import long_rows
    try:
        rules = [Acquisition.parse(a) for a in _parse_str_list(cfg["acquisitions"])]
        config = ActiveConfig(rounds=int(cfg["rounds"]), batch=int(cfg["batch"]),
                              origami_cells=int(cfg["origami_cells"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    K, models = int(cfg["class_count"]), int(cfg["model_count"])
    if K < 1 or models < 1:
        raise ConfigError("class_count and model_count must be positive")
    try:
        check_budget(K, config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seeds = _parse_int_list(cfg["seeds"])
    order = [str(r) for r in rules]
    rows, failures = [], []
    for rule in rules:
        with run.timed(str(rule)):
            results = _fan_out(lambda s: _run_one(K, models, rule, config, s), seeds, cfg.jobs)
        for seed, rec, err in results:
            if err is not None:
                failures.append({"strategy": str(rule), "seed": seed, "error": err})
            else:
                rows += long_rows([rec], ["accuracy", "bottom_quartile_accuracy"], label="acquisition")
    pairs = [(o, "random", m, "greater") for o in order if o != "random"
             for m in ("accuracy", "bottom_quartile_accuracy")]
    if "random" not in order:
        pairs = []
    _write_bench(run, rows, pairs, failures, ["accuracy", "bottom_quartile_accuracy"], order, "active learning")
    return EXIT_OK


def cmd_bench_oracle(cfg: RunConfig, run: Run) -> int:
    from origami.benchlab.oracles import MAX_QUADRATURE_OUTCOMES, grid_quadrature_gap
    from origami.objectives import integral_objective_matrix, pair_indices
    from origami.simplex import Fold
    A, C = int(cfg["actions"]), int(cfg["outcomes"])
    if not 2 <= C <= MAX_QUADRATURE_OUTCOMES:
        raise ConfigError(f"oracle needs 2 <= outcomes <= {MAX_QUADRATURE_OUTCOMES}")
    ext = _extension(cfg)
    N, step, seed = int(cfg["mc_samples"]), float(cfg["step"]), cfg["seed"]
    instances = int(cfg["instances"])
    iu, ju = pair_indices(C)

    def one(k):
        L = np.random.default_rng([seed, k]).random((A, C))
        M, est = integral_objective_matrix(L, N, seed=[seed, k, 1], ext=ext, return_estimates=True)
        quad = np.full((C, C), np.inf)
        recs = []
        for i, j in zip(iu.tolist(), ju.tolist()):
            q = grid_quadrature_gap(L, Fold(i, j), ext, step)
            quad[i, j] = q
            e = est[(i, j)]
            z = (e.mean - q) / e.standard_error if e.standard_error > 0 else 0.0
            recs.append({"instance": k, "source": i, "target": j, "mc_mean": e.mean,
                         "standard_error": e.standard_error, "quadrature": q, "z_score": z})
        mc_best = M.argmin()
        qi, qj = np.unravel_index(np.argmin(quad), quad.shape)
        return recs, (mc_best.source, mc_best.target) == (int(qi), int(qj))

    with run.timed("oracle"):
        results = _fan_out(one, list(range(instances)), cfg.jobs)
    rows, agree, failures = [], 0, []
    for k, res, err in results:
        if err is not None:
            failures.append({"instance": k, "error": err})
            continue
        rows += res[0]
        agree += int(res[1])
    within = sum(abs(r["z_score"]) <= 3.0 for r in rows)
    report = {"instances": instances, "pairs": len(rows), "pairs_within_3se": within,
              "argmin_agreement": agree, "mc_samples": N, "step": step, "failures": failures}
    cols = ["instance", "source", "target", "mc_mean", "standard_error", "quadrature", "z_score"]
    run.write_text("oracle.csv", oio.rows_to_csv(rows, cols))
    run.write_json("summary.json", report)
    print(f"{within}/{len(rows)} pairs within 3 standard errors; argmin agrees on {agree}/{instances}")
    if failures:
        raise SeedFailures(f"{len(failures)} instances failed")
    return EXIT_OK


COMMANDS = {
    "fold": cmd_fold,
    "inspect": cmd_inspect,
    "gap": cmd_gap,
    "surrogate train": cmd_surrogate_train,
    "surrogate eval": cmd_surrogate_eval,
    "surrogate bench": cmd_surrogate_bench,
    "bench pipeline": cmd_bench_pipeline,
    "bench active": cmd_bench_active,
    "bench oracle": cmd_bench_oracle,
}


# ----------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of settings; flags override its values")
    p.add_argument("--seed", type=int, help="master seed (default: $ORIGAMI_SEED or 0)")
    p.add_argument("--jobs", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--out", help="output directory")


def _fold_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--loss", help="loss matrix (.csv or .json), one action per row")
    p.add_argument("--objective", choices=["vertex", "integral", "max-increase", "surrogate"])
    p.add_argument("--mc-samples", type=int, dest="mc_samples")
    p.add_argument("--ccp-restarts", type=int, dest="ccp_restarts")
    p.add_argument("--extension", choices=["worst-case", "weighted-sum", "sum"])
    stop = p.add_mutually_exclusive_group()
    stop.add_argument("--cells", type=int)
    stop.add_argument("--folds", type=int)
    stop.add_argument("--gap-tol", type=float, dest="gap_tol")
    p.add_argument("--probe", help="CSV of probability vectors for --gap-tol")
    p.add_argument("--probe-size", type=int, dest="probe_size")
    p.add_argument("--model", help="surrogate model file for --objective surrogate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="origami", description="Decision-aware folding of outcome spaces.")
    parser.add_argument("--version", action="version", version=f"origami {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fold", help="fold a loss matrix")
    _fold_args(p)
    _common(p)

    p = sub.add_parser("inspect", help="objective matrix and best next fold")
    _fold_args(p)
    _common(p)

    p = sub.add_parser("gap", help="H-entropy gap of a fold tree")
    p.add_argument("--loss")
    p.add_argument("--tree", help="tree.json written by 'fold'")
    p.add_argument("--extension", choices=["worst-case", "weighted-sum", "sum"])
    p.add_argument("--probe")
    p.add_argument("--probe-size", type=int, dest="probe_size")
    p.add_argument("--steps", type=int, help="use only the first STEPS folds")
    p.add_argument("--csv", action="store_true", default=None, help="also write per-point gaps")
    _common(p)

    sp = sub.add_parser("surrogate", help="learned objective").add_subparsers(dest="action", required=True)
    p = sp.add_parser("train")
    p.add_argument("--actions", type=int)
    p.add_argument("--outcomes", type=int)
    p.add_argument("--examples", type=int)
    p.add_argument("--mc-samples", type=int, dest="mc_samples")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--optimizer", choices=["adam", "sgd_momentum"])
    p.add_argument("--dataset", help="dataset .npz instead of generating one")
    p.add_argument("--save-dataset", action="store_true", default=None, dest="save_dataset")
    _common(p)
    p = sp.add_parser("eval")
    p.add_argument("--model", action="append")
    p.add_argument("--examples", type=int)
    p.add_argument("--mc-samples", type=int, dest="mc_samples")
    _common(p)
    p = sp.add_parser("bench")
    p.add_argument("--model", action="append")
    p.add_argument("--outcome-counts", dest="outcome_counts", help="e.g. 3:9 or 3,5,8")
    p.add_argument("--methods", help="comma list of surrogate, vertex, integral")
    p.add_argument("--repeats", type=int)
    p.add_argument("--actions", type=int)
    p.add_argument("--mc-samples", type=int, dest="mc_samples")
    _common(p)

    bp = sub.add_parser("bench", help="benchmark reports").add_subparsers(dest="action", required=True)
    p = bp.add_parser("pipeline")
    p.add_argument("--grid-size", type=int, dest="grid_size")
    p.add_argument("--world-seed", type=int, dest="world_seed")
    p.add_argument("--train-size", type=int, dest="train_size")
    p.add_argument("--test-size", type=int, dest="test_size")
    p.add_argument("--strategies", help="comma list, e.g. location_predict,origami(5)")
    p.add_argument("--seeds", help="e.g. 0:20 or 1,2,3")
    _common(p)
    p = bp.add_parser("active")
    p.add_argument("--class-count", type=int, dest="class_count")
    p.add_argument("--model-count", type=int, dest="model_count")
    p.add_argument("--rounds", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--acquisitions", help="comma list of random, worst_N, origami")
    p.add_argument("--origami-cells", type=int, dest="origami_cells")
    p.add_argument("--seeds")
    _common(p)
    p = bp.add_parser("oracle")
    p.add_argument("--actions", type=int)
    p.add_argument("--outcomes", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--mc-samples", type=int, dest="mc_samples")
    p.add_argument("--step", type=float)
    p.add_argument("--extension", choices=["worst-case", "weighted-sum", "sum"])
    _common(p)
    return parser


def _exit_code(exc: BaseException) -> int:
    from origami.surrogate import ShapeMismatch, TrainingDiverged
    if isinstance(exc, (oio.InputError, DimensionError, ShapeMismatch)):
        return EXIT_INPUT
    if isinstance(exc, (ConfigError, StopRuleError)):
        return EXIT_CONFIG
    if isinstance(exc, (TrainingDiverged, LPError, FloatingPointError, SeedFailures)):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    raise exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    name = args.command if getattr(args, "action", None) is None else f"{args.command} {args.action}"
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "action")}
    run = None
    try:
        cfg = RunConfig.resolve(name, flags)
        run = Run(cfg)
        code, error = COMMANDS[name](cfg, run), None
    except Exception as exc:  # noqa: BLE001 - mapped to the exit-code contract
        code, error = _exit_code(exc), str(exc)
        print(f"origami: error: {error}", file=sys.stderr)
    if run is None and error is not None and flags.get("out"):
        # configuration failed before the run started; still leave a manifest behind
        run = Run(RunConfig(name, {}, 1, Path(flags["out"])))
    if run is not None:
        run.finish(code, error)
    return code


if __name__ == "__main__":
    sys.exit(main())
