import numpy as np
import pytest

from origami.folding import (
    FoldTree,
    Merge,
    Partition,
    StopRule,
    StopRuleError,
    cumulative_gap,
    hierarchical_origami,
    project_dataset,
    run_origami,
)
from origami.objectives import IntegralObjective, MaxIncreaseObjective, VertexObjective, integral_objective
from origami.simplex import Fold, fold_loss, sample_simplex

# columns 1 and 2 identical, all other column minima distinct
DUP_12 = np.array([[0.9, 0.3, 0.3, 0.1, 0.6], [0.5, 0.8, 0.8, 0.7, 0.2]])


def test_fold_count_zero_gives_singletons(toy_loss):
    res = run_origami(toy_loss, stop=StopRule.fold_count(0))
    assert res.partition.cells == ((0,), (1,), (2,))
    assert res.tree.merges == []
    np.testing.assert_array_equal(res.folded_loss, toy_loss)


def test_target_one_cell_merges_everything(rng):
    L = rng.random((3, 6))
    res = run_origami(L, stop=StopRule.target_cells(1))
    assert res.partition.cells == (tuple(range(6)),)
    assert res.tree.fold_count == 5


def test_duplicate_columns_fold_first():
    res = run_origami(DUP_12, VertexObjective(), stop=StopRule.fold_count(1))
    assert res.partition.cells == ((0,), (1, 2), (3,), (4,))


def test_node_id_example():
    tree = FoldTree(5)
    tree.merge_nodes(2, 1)
    tree.merge_nodes(3, 4)
    assert tree.partition().cells == ((0,), (1, 2), (3, 4))
    assert tree.frontier() == [0, 5, 6]
    assert tree.folds() == [Fold(2, 1), Fold(2, 3)]


def test_frontier_arithmetic(rng):
    L = rng.random((2, 7))
    for n in range(1, 8):
        res = run_origami(L, stop=StopRule.target_cells(n))
        assert len(res.partition) == n
        assert res.tree.fold_count == 7 - n
        assert res.folded_loss.shape == (2, n)
        for k in range(res.tree.fold_count + 1):
            assert len(res.tree.partition(k)) == 7 - k


def test_folded_loss_matches_replayed_folds(rng):
    L = rng.random((3, 6))
    res = run_origami(L, stop=StopRule.target_cells(3))
    current = L
    for fold in res.tree.folds():
        current = fold_loss(current, fold, "worst_case")
    np.testing.assert_array_equal(res.folded_loss, current)
    # worst-case folded column is the max over the cell's original columns
    for k, cell in enumerate(res.partition.cells):
        np.testing.assert_allclose(res.folded_loss[:, k], L[:, list(cell)].max(axis=1))


def test_unsatisfiable_stop_rules(toy_loss):
    with pytest.raises(StopRuleError):
        run_origami(toy_loss, stop=StopRule.target_cells(4))
    with pytest.raises(StopRuleError):
        run_origami(toy_loss, stop=StopRule.target_cells(0))
    with pytest.raises(StopRuleError):
        run_origami(toy_loss, stop=StopRule.fold_count(3))
    with pytest.raises(StopRuleError):
        StopRule.fold_count(-1)


def test_gap_tolerance_stops_before_exceeding(rng):
    L = rng.random((3, 6))
    probe = sample_simplex(2000, 6, 1)
    full = run_origami(L, stop=StopRule.target_cells(1))
    gaps = [cumulative_gap(FoldTree(6, full.tree.merges[:k]), L, probe) for k in range(6)]
    tau = (gaps[2] + gaps[3]) / 2
    assert gaps[2] < tau < gaps[3]
    res = run_origami(L, stop=StopRule.gap_tolerance(tau, probe))
    assert res.tree.fold_count == 2
    assert cumulative_gap(res.tree, L, probe) <= tau


def test_gap_tolerance_zero_allows_only_free_folds():
    probe = sample_simplex(1000, 5, 0)
    res = run_origami(DUP_12, stop=StopRule.gap_tolerance(0.0, probe))
    assert res.partition.cells == ((0,), (1, 2), (3,), (4,))


def test_gap_tolerance_probe_dimension_checked(toy_loss):
    with pytest.raises(StopRuleError):
        run_origami(toy_loss, stop=StopRule.gap_tolerance(0.1, sample_simplex(10, 4, 0)))


@pytest.mark.parametrize("ext", ["sum", "weighted_sum"])
def test_gap_tracker_matches_cumulative_gap(rng, ext):
    L = rng.random((2, 5))
    probe = sample_simplex(500, 5, 2)
    res = run_origami(L, stop=StopRule.gap_tolerance(0.05, probe), ext=ext)
    assert cumulative_gap(res.tree, L, probe, ext) <= 0.05 + 1e-12


@pytest.mark.parametrize("objective", [IntegralObjective(300, 0), MaxIncreaseObjective(restarts=2)])
def test_run_is_deterministic(rng, objective):
    L = rng.random((2, 5))
    a = run_origami(L, objective, stop=StopRule.target_cells(2), seed=3)
    b = run_origami(L, objective, stop=StopRule.target_cells(2), seed=3, jobs=4)
    assert a.tree.to_dict() == b.tree.to_dict()


def test_tree_round_trip(rng):
    res = run_origami(rng.random((2, 6)), stop=StopRule.target_cells(2))
    back = FoldTree.from_dict(res.tree.to_dict())
    assert back == res.tree
    assert back.partition() == res.partition


def test_tree_rejects_invalid_merges():
    with pytest.raises(ValueError):
        FoldTree(3, [Merge(0, 0, 7)])
    with pytest.raises(ValueError):
        FoldTree(3, [Merge(1, 0, 1)])
    tree = FoldTree(3)
    tree.merge_nodes(0, 1)
    with pytest.raises(ValueError):
        tree.merge_nodes(0, 2)


def test_partition_validation_and_round_trip():
    p = Partition([[2, 0], [1]], labels=["a", "b"])
    assert p.cells == ((0, 2), (1,))
    assert p.cell_index().tolist() == [0, 1, 0]
    assert Partition.from_dict(p.to_dict()) == p
    for bad in ([[0], [0, 1]], [[0], [2]], [[], [0]]):
        with pytest.raises(ValueError):
            Partition(bad)


def test_cumulative_gap_examples(toy_loss):
    probe = sample_simplex(10_000, 3, 5)
    assert cumulative_gap(FoldTree(3), toy_loss, probe) == 0.0
    tree = FoldTree(5)
    tree.merge_nodes(1, 2)
    assert cumulative_gap(tree, DUP_12, sample_simplex(100, 5, 0)) == pytest.approx(0.0, abs=1e-12)
    tree = FoldTree(3)
    tree.add_fold(Fold(0, 1))
    est = integral_objective(toy_loss, Fold(0, 1), probe)
    assert abs(cumulative_gap(tree, toy_loss, probe) - est.mean) <= 3 * est.standard_error


def test_cumulative_gap_dimension_mismatch(toy_loss):
    with pytest.raises(ValueError):
        cumulative_gap(FoldTree(4), toy_loss, sample_simplex(5, 3, 0))


def test_hierarchy_outer_singletons_has_no_inner_runs(rng):
    root = hierarchical_origami(rng.random((2, 4)), outer_stop=StopRule.target_cells(4))
    assert [c.outcomes for c in root.children] == [(0,), (1,), (2,), (3,)]
    assert all(not c.children and c.tree is None for c in root.children)


def test_hierarchy_two_levels_cover(rng):
    root = hierarchical_origami(rng.random((3, 6)), outer_stop=StopRule.target_cells(2),
                                inner_stop=StopRule.target_cells(1))
    level1 = root.level(1)
    assert len(level1) == 2
    assert sorted(z for s in level1 for z in s) == list(range(6))
    leaves = root.leaves()
    assert sorted(z for s in leaves for z in s) == list(range(6))
    for child in root.children:
        if len(child.outcomes) > 1:
            assert child.tree is not None and child.tree.fold_count == len(child.outcomes) - 1


def test_hierarchy_clamps_inner_rule(rng):
    root = hierarchical_origami(rng.random((2, 5)), outer_stop=StopRule.target_cells(2),
                                inner_stop=StopRule.target_cells(3))
    assert sorted(z for s in root.leaves() for z in s) == list(range(5))


def test_project_dataset_examples():
    assert project_dataset(FoldTree(3), [2, 0, 1]).tolist() == [2, 0, 1]
    tree = FoldTree(3)
    tree.merge_nodes(1, 2)
    assert project_dataset(tree, [0, 1, 2, 1]).tolist() == [0, 1, 1, 1]
    with pytest.raises(ValueError):
        project_dataset(tree, [3])


def test_project_dataset_random_trees(rng):
    for _ in range(20):
        C = int(rng.integers(2, 9))
        res = run_origami(rng.random((2, C)), stop=StopRule.target_cells(int(rng.integers(1, C + 1))))
        cells = res.partition.cells
        mapped = project_dataset(res.tree, np.arange(C))
        for z in range(C):
            assert z in cells[mapped[z]]
