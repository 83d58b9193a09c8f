"""Oracles and desk-scale benchmark simulations."""

from origami.benchlab.active import ActiveConfig, simulate_active_learning
from origami.benchlab.oracles import (exhaustive_partition_search, grid_max_gap, grid_quadrature_gap,
                                      set_partitions, simplex_lattice)
from origami.benchlab.pipeline import simulate_pipeline, world_partition
from origami.benchlab.predictors import TabularPredictor
from origami.benchlab.report import DEFAULT_SEEDS, paired_test
from origami.benchlab.world import Dataset, SyntheticWorld, WorldConfig, build_synthetic_world

__all__ = [
    "ActiveConfig", "DEFAULT_SEEDS", "Dataset", "SyntheticWorld", "TabularPredictor", "WorldConfig",
    "build_synthetic_world", "exhaustive_partition_search", "grid_max_gap", "grid_quadrature_gap",
    "paired_test", "set_partitions", "simplex_lattice", "simulate_active_learning", "simulate_pipeline",
    "world_partition",
]
