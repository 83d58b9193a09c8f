import json

import numpy as np
import pytest

from origami import io as oio
from origami.folding import FoldTree, Partition


def test_plain_csv():
    lm = oio.parse_loss_csv("1,0,0\n0,0,1\n")
    np.testing.assert_array_equal(lm.entries, [[1, 0, 0], [0, 0, 1]])
    assert lm.outcomes is None and lm.actions is None


def test_csv_with_header_and_row_labels():
    lm = oio.parse_loss_csv("action,a,b\nland,0.5,1\nair,0.25,0\n")
    assert list(lm.outcomes) == ["a", "b"]
    assert list(lm.actions) == ["land", "air"]
    np.testing.assert_array_equal(lm.entries, [[0.5, 1.0], [0.25, 0.0]])


def test_csv_header_without_labels_and_blank_lines():
    lm = oio.parse_loss_csv("x,y,z\n\n1,2,3\n")
    assert list(lm.outcomes) == ["x", "y", "z"]
    assert lm.entries.shape == (1, 3)


@pytest.mark.parametrize("text,line,col,fragment", [
    ("1,0\n0,abc\n", 2, 2, "not a number"),
    ("1,0,0\n0,1\n", 2, None, "expected 3 values, found 2"),
    ("1,nan\n", 1, 2, "non-finite"),
    ("a,b\n", 1, None, "header without data rows"),
])
def test_csv_diagnostics(text, line, col, fragment):
    with pytest.raises(oio.InputError) as info:
        oio.parse_loss_csv(text, "L.csv")
    err = info.value
    assert err.line == line and err.column == col
    assert fragment in str(err)
    assert str(err).startswith(f"L.csv:{line}")


def test_empty_csv():
    with pytest.raises(oio.InputError):
        oio.parse_loss_csv("\n\n")


def test_json_forms():
    lm = oio.parse_loss_json(json.dumps({"actions": ["p", "q"], "outcomes": ["u", "v"],
                                         "entries": [[0, 1], [1, 0]]}))
    assert list(lm.actions) == ["p", "q"] and list(lm.outcomes) == ["u", "v"]
    np.testing.assert_array_equal(oio.parse_loss_json("[[0.5, 0.25]]").entries, [[0.5, 0.25]])


@pytest.mark.parametrize("text", ['{"entries": [[1, "x"]]}', '{"actions": []}', "[1, 2]", '{"entries": [[1e999]]}',
                                  "{not json"])
def test_json_errors(text):
    with pytest.raises(oio.InputError):
        oio.parse_loss_json(text, "L.json")


def test_json_syntax_error_has_position():
    with pytest.raises(oio.InputError) as info:
        oio.parse_loss_json('{\n  "entries": [1,\n}', "L.json")
    assert info.value.line == 3


def test_loss_csv_round_trip(tmp_path, rng):
    L = rng.random((3, 4))
    path = tmp_path / "L.csv"
    path.write_text(oio.loss_to_csv(L, actions=["a", "b", "c"], outcomes=["w", "x", "y", "z"]))
    back = oio.read_loss(path)
    np.testing.assert_array_equal(back.entries, L)
    assert list(back.actions) == ["a", "b", "c"]
    path.write_text(oio.loss_to_csv(L))
    np.testing.assert_array_equal(oio.read_loss(path).entries, L)


def test_read_loss_missing_file(tmp_path):
    with pytest.raises(oio.InputError):
        oio.read_loss(tmp_path / "missing.csv")


def test_read_probe(tmp_path):
    path = tmp_path / "probe.csv"
    path.write_text("0.5,0.5,0\n0.2,0.3,0.5\n")
    P = oio.read_probe(path, 3)
    assert P.shape == (2, 3)
    with pytest.raises(oio.InputError):
        oio.read_probe(path, 4)
    path.write_text("0.5,0.6,0\n")
    with pytest.raises(oio.InputError):
        oio.read_probe(path, 3)


def test_canonical_json():
    assert oio.dumps({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'
    with pytest.raises(ValueError):
        oio.dumps({"x": float("nan")})


def test_tree_and_partition_files(tmp_path):
    tree = FoldTree(4)
    tree.merge_nodes(0, 3, objective=0.25)
    oio.write_json(tmp_path / "tree.json", tree.to_dict())
    assert oio.read_tree(tmp_path / "tree.json") == tree
    part = Partition([[0, 3], [1], [2]])
    oio.write_json(tmp_path / "part.json", part.to_dict())
    assert oio.read_partition(tmp_path / "part.json") == part
    (tmp_path / "bad.json").write_text('{"leaf_count": 2, "merges": [{"step": 0, "source": 0, "target": 5}]}')
    with pytest.raises(oio.InputError):
        oio.read_tree(tmp_path / "bad.json")


def test_rows_to_csv():
    text = oio.rows_to_csv([{"a": 1, "b": 0.1}, {"a": np.int64(2), "b": None}], ["a", "b"])
    assert text == "a,b\n1,0.1\n2,\n"
