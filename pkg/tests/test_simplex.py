import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from origami.simplex import (DimensionError, Fold, LossMatrix, SetExtension, argmin_action, as_loss, as_prob,
                             fold_loss, fold_prob, h_entropy, merge_columns, sample_simplex, subopt_gap)


def test_h_entropy_uniform(toy_loss):
    assert h_entropy(toy_loss, [1 / 3, 1 / 3, 1 / 3]) == pytest.approx(1 / 3, abs=1e-12)


def test_h_entropy_and_action(toy_loss):
    p = [0.4, 0.35, 0.25]
    assert h_entropy(toy_loss, p) == pytest.approx(0.25, abs=1e-12)
    assert argmin_action(toy_loss, p) == 1


def test_h_entropy_batch_matches_rows(toy_loss, rng):
    P = sample_simplex(50, 3, rng)
    batch = h_entropy(toy_loss, P)
    assert batch.shape == (50,)
    assert np.allclose(batch, [h_entropy(toy_loss, p) for p in P])


def test_h_entropy_dimension_mismatch(toy_loss):
    with pytest.raises(DimensionError):
        h_entropy(toy_loss, [0.5, 0.5])


def test_argmin_ties_take_smallest_index():
    L = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert argmin_action(L, [0.5, 0.5]) == 0


def test_as_prob_rejects_bad_mass():
    with pytest.raises(ValueError):
        as_prob([0.5, 0.6])
    with pytest.raises(ValueError):
        as_prob([1.5, -0.5])
    p = as_prob([0.5, 0.5 + 1e-9])
    assert p.sum() == pytest.approx(1.0, abs=1e-15)


def test_as_loss_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_loss([[1.0, np.nan]])


def test_loss_matrix_labels():
    lm = LossMatrix([[1, 2, 3]], actions=["a"], outcomes=["x", "y", "z"])
    assert lm.action_count == 1 and lm.outcome_count == 3
    with pytest.raises(DimensionError):
        LossMatrix([[1, 2, 3]], outcomes=["x"])
    with pytest.raises(ValueError):
        lm.entries[0, 0] = 5.0


def test_fold_validation():
    with pytest.raises(ValueError):
        Fold(1, 1)
    with pytest.raises(ValueError):
        Fold(-1, 0)
    with pytest.raises(DimensionError):
        Fold(0, 3).check(3)
    assert str(Fold(2, 0)) == "2->0"


def test_fold_relabel():
    # the source lands on the merged target
    assert Fold(1, 3).relabel(4).tolist() == [0, 2, 1, 2]
    assert Fold(1, 3).new_target == 2
    assert Fold(3, 1).new_target == 1


def test_fold_prob_uniform():
    q = fold_prob([1 / 3, 1 / 3, 1 / 3], Fold(0, 2))
    assert np.allclose(q, [1 / 3, 2 / 3])


def test_fold_prob_vertex_to_vertex():
    assert np.allclose(fold_prob([1, 0, 0], Fold(0, 1)), [1, 0])


def test_fold_prob_batch(rng):
    P = sample_simplex(20, 5, rng)
    Q = fold_prob(P, Fold(3, 1))
    assert Q.shape == (20, 4)
    assert np.allclose(Q, [fold_prob(p, Fold(3, 1)) for p in P])


def test_fold_loss_worst_case(toy_loss):
    assert np.array_equal(fold_loss(toy_loss, Fold(0, 1), "worst_case"), [[1, 0], [0, 1]])


def test_fold_loss_sum(toy_loss):
    assert np.array_equal(fold_loss(toy_loss, Fold(1, 2), "sum"), [[1, 0], [0, 1]])


def test_fold_loss_weighted(toy_loss):
    out = fold_loss(toy_loss, Fold(1, 2), "weighted_sum", p=[1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(out, [[1, 0], [0, 0.5]])


def test_fold_loss_weighted_needs_context(toy_loss):
    with pytest.raises(ValueError):
        fold_loss(toy_loss, Fold(1, 2), "weighted_sum")


def test_weighted_zero_mass_falls_back_to_max(toy_loss):
    col, degenerate = merge_columns(toy_loss, 1, 2, SetExtension.WEIGHTED_SUM, np.array([1.0, 0.0, 0.0]))
    assert degenerate
    assert np.array_equal(col, [0.0, 1.0])


def test_subopt_gap_example(toy_loss):
    assert subopt_gap(toy_loss, [0.4, 0.35, 0.25], Fold(1, 2)) == pytest.approx(0.15, abs=1e-12)


def test_subopt_gap_identical_columns_is_zero(rng):
    L = rng.random((3, 4))
    L[:, 2] = L[:, 0]
    for p in sample_simplex(30, 4, rng):
        assert subopt_gap(L, p, Fold(0, 2)) == pytest.approx(0.0, abs=1e-12)


def test_extension_parse():
    assert SetExtension.parse("worst-case") is SetExtension.WORST_CASE
    assert SetExtension.parse("weighted_sum") is SetExtension.WEIGHTED_SUM
    with pytest.raises(ValueError):
        SetExtension.parse("median")


def test_sample_simplex_shape_and_determinism():
    a = sample_simplex(100, 4, 7)
    b = sample_simplex(100, 4, 7)
    assert a.shape == (100, 4)
    assert np.array_equal(a, b)
    assert np.allclose(a.sum(axis=1), 1.0)
    assert (a >= 0).all()


def test_sample_simplex_is_flat_dirichlet():
    P = sample_simplex(200000, 3, 0)
    # flat Dirichlet marginals are Beta(1, 2): mean 1/3, variance 1/18
    assert np.allclose(P.mean(axis=0), 1 / 3, atol=3e-3)
    assert np.allclose(P.var(axis=0), 1 / 18, atol=2e-3)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(2, 8), st.integers(0, 2 ** 31 - 1), st.data())
def test_worst_case_fold_never_lowers_entropy(A, C, seed, data):
    rng = np.random.default_rng(seed)
    L = rng.random((A, C))
    i = data.draw(st.integers(0, C - 1))
    j = data.draw(st.integers(0, C - 1).filter(lambda x: x != i))
    p = sample_simplex(1, C, rng)[0]
    assert subopt_gap(L, p, Fold(i, j), "worst_case") >= -1e-12
    assert subopt_gap(L, p, Fold(i, j), "sum") >= -1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(2, 8), st.integers(0, 2 ** 31 - 1))
def test_weighted_fold_preserves_entropy(A, C, seed):
    rng = np.random.default_rng(seed)
    L = rng.random((A, C))
    p = sample_simplex(1, C, rng)[0]
    i, j = rng.choice(C, 2, replace=False)
    assert abs(subopt_gap(L, p, Fold(int(i), int(j)), "weighted_sum")) <= 1e-12
