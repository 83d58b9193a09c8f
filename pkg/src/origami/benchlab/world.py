"""A seeded spatial decision world standing in for the wildfire data.

Outcomes are cells of a ``G x G`` grid.  Static feature fields (terrain
elevation and slope, vegetation, mean wind) fix the decision loss of the
three response actions; a weekly dryness field plus the static fire risk
fixes where the week's largest event happens.  Predictors only see a
coarse, noisy view of the weekly field.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict

import numpy as np
from scipy.ndimage import gaussian_filter

ACTIONS = ("land", "aircraft", "indirect")


@dataclass
class WorldConfig:
    smoothness: float = 3.0  # gaussian sigma of feature fields, in grid cells
    weekly_smoothness: float = 2.5
    risk_weight: float = 1.0
    weekly_weight: float = 3.0
    event_sharpness: float = 6.0
    context_blocks: int = 5  # weekly field is observed as blocks x blocks averages
    context_noise: float = 0.25
    base_costs: tuple = (0.0, 0.2, 0.4)  # per-action fixed cost before terrain penalties
    penalty_steepness: float = 10.0  # 0 keeps penalties linear; larger values make them switch near the median


def smooth_field(rng: np.random.Generator, G: int, sigma: float) -> np.ndarray:
    """Low-frequency noise rescaled to ``[0, 1]``."""
    raw = gaussian_filter(rng.standard_normal((G, G)), sigma, mode="wrap")
    lo, hi = raw.min(), raw.max()
    return (raw - lo) / (hi - lo) if hi > lo else np.zeros_like(raw)


def _unit(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(), x.max()
    return (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return np.vstack([_unit(row) for row in x])


@dataclass
class Dataset:
    contexts: np.ndarray  # (n, d) features seen by predictors
    labels: np.ndarray  # (n,) outcome index of the week's largest event
    conditionals: np.ndarray  # (n, C) true p(z | x)
    split: np.ndarray  # (n,) "train" / "test"

    def __post_init__(self):
        C = self.conditionals.shape[1]
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= C):
            raise ValueError("labels out of range")

    def part(self, name: str) -> "Dataset":
        mask = self.split == name
        return Dataset(self.contexts[mask], self.labels[mask], self.conditionals[mask], self.split[mask])


@dataclass
class SyntheticWorld:
    grid_size: int
    features: Dict[str, np.ndarray]  # name -> (G, G)
    loss: np.ndarray  # (3, G*G) in [0, 1]
    static_risk: np.ndarray  # (G*G,)
    config: WorldConfig = field(default_factory=WorldConfig)
    seed: int = 0

    @property
    def outcome_count(self) -> int:
        return self.grid_size ** 2

    def sample_week(self, rng: np.random.Generator):
        cfg, G = self.config, self.grid_size
        dryness = smooth_field(rng, G, cfg.weekly_smoothness)
        logits = cfg.event_sharpness * (cfg.risk_weight * self.static_risk + cfg.weekly_weight * dryness.ravel())
        p = np.exp(logits - logits.max())
        p /= p.sum()
        b = min(cfg.context_blocks, G)  # no empty blocks on small grids
        edges = np.linspace(0, G, b + 1).astype(int)
        blocks = np.array([
            dryness[edges[r]:edges[r + 1], edges[c]:edges[c + 1]].mean()
            for r in range(b) for c in range(b)
        ])
        context = blocks + cfg.context_noise * rng.standard_normal(blocks.size)
        return context, p

    def sample_dataset(self, train_size: int, test_size: int, seed) -> Dataset:
        rng = np.random.default_rng(seed)
        contexts, labels, conds = [], [], []
        for _ in range(train_size + test_size):
            x, p = self.sample_week(rng)
            contexts.append(x)
            conds.append(p)
            labels.append(rng.choice(p.size, p=p))
        split = np.array(["train"] * train_size + ["test"] * test_size)
        return Dataset(np.array(contexts), np.array(labels, dtype=int), np.array(conds), split)

    def to_dict(self) -> dict:
        return {"grid_size": self.grid_size, "seed": self.seed, "config": asdict(self.config),
                "actions": list(ACTIONS)}


def build_synthetic_world(grid_size: int = 20, feature_config: WorldConfig = None, seed: int = 0) -> SyntheticWorld:
    """Feature fields, crafted decision loss and static fire risk for one seed.

    Land crews are costly on steep, high terrain, aircraft in strong wind
    and indirect containment in dense vegetation.  Each action pays a
    fixed cost ``b`` plus ``(1 - b)`` times its penalty field scaled to
    ``[0, 1]``, so every entry lies in ``[0, 1]``.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    cfg = feature_config or WorldConfig()
    rng = np.random.default_rng(seed)
    G = grid_size
    elevation = smooth_field(rng, G, cfg.smoothness)
    gy, gx = np.gradient(gaussian_filter(elevation, 1.0, mode="wrap"))
    slope = _unit(np.hypot(gx, gy))
    vegetation = smooth_field(rng, G, cfg.smoothness)
    wind = smooth_field(rng, G, cfg.smoothness)
    features = {"elevation": elevation, "slope": slope, "vegetation": vegetation, "wind": wind}

    penalties = np.vstack([
        _unit(0.6 * slope + 0.4 * elevation).ravel(),
        _unit(wind).ravel(),
        _unit(vegetation).ravel(),
    ])
    if cfg.penalty_steepness > 0:
        med = np.median(penalties, axis=1, keepdims=True)
        penalties = _unit_rows(1.0 / (1.0 + np.exp(-cfg.penalty_steepness * (penalties - med))))
    base = np.asarray(cfg.base_costs, dtype=float)[:, None]
    loss = base + (1.0 - base) * penalties
    risk = _unit(0.6 * vegetation + 0.4 * wind).ravel()
    return SyntheticWorld(G, features, loss, risk, cfg, seed)
