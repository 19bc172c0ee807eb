import json

import numpy as np
import pytest
from hypothesis import given

from strategies import graphs
from strictpart import Coloring, WeightedGraph
from strictpart.io import (FormatError, coloring_record, dumps, format_graph, parse_graph,
                           read_coloring, read_graph, write_coloring, write_graph)


def same_graph(a, b):
    return (a.n == b.n and np.array_equal(a.edges, b.edges) and np.array_equal(a.costs, b.costs)
            and np.array_equal(a.weights, b.weights)
            and ((a.coords is None and b.coords is None) or np.array_equal(a.coords, b.coords)))


def test_parse_with_comments_and_coordinates():
    text = """# a 2x1 grid
    2 1 2
    0 0 1.5   # vertex 0
    1 0 2
    0 1 3
    """
    g = parse_graph(text)
    assert g.n == 2 and g.m == 1
    assert g.coords.tolist() == [[0, 0], [1, 0]]
    assert g.weights.tolist() == [1.5, 2.0] and g.costs.tolist() == [3.0]


@pytest.mark.parametrize("text", [
    "", "2", "2 1\n1\n1\n", "2 1\n1\n1\n0 1\n", "1 0\nx\n", "2 0\n1\n-1\n", "2 1\n1\n1\n0 0 1\n",
    "2 1\n1\n1\n0 5 1\n", "1 0\nnan\n",
])
def test_malformed_inputs(text):
    with pytest.raises(FormatError):
        parse_graph(text)


@given(graphs(integer=False))
def test_round_trip_is_bit_exact(g):
    again = parse_graph(format_graph(g))
    assert same_graph(g, again)
    assert format_graph(again) == format_graph(g)


def test_integer_file_round_trips_textually(tmp_path):
    text = "3 2\n1\n2\n3\n0 1 4\n1 2 5\n"
    path = tmp_path / "g.txt"
    path.write_text(text)
    g = read_graph(path)
    write_graph(g, tmp_path / "h.txt")
    assert (tmp_path / "h.txt").read_text() == text


def test_dumps_is_deterministic_and_valid_json():
    record = {"b": 0.1, "a": [1.0, 2, 1 / 3], "c": {"z": True, "y": None}}
    text = dumps(record)
    assert text == dumps(dict(reversed(list(record.items()))))
    assert json.loads(text) == record
    assert '"a": [1.0, 2, 0.33333333333333331]' in text


def test_coloring_file_round_trip(tmp_path):
    g = WeightedGraph(4, [(0, 1), (1, 2), (2, 3)], [1, 2, 3], [1, 1, 1, 1])
    chi = Coloring(g, 2, [0, 0, 1, 1])
    write_coloring(chi, tmp_path / "c.json", {"seed": 3})
    rec = json.loads((tmp_path / "c.json").read_text())
    assert rec["seed"] == 3 and rec == json.loads(dumps({**coloring_record(chi), "seed": 3}))
    assert rec["max_boundary_cost"] == 2.0 and rec["eq1_slack"] == 0.5
    assert read_coloring(tmp_path / "c.json", g) == chi


def test_coloring_file_of_wrong_length(tmp_path):
    g = WeightedGraph(3)
    (tmp_path / "c.json").write_text('{"k": 2, "colors": [0, 1]}')
    with pytest.raises(FormatError):
        read_coloring(tmp_path / "c.json", g)
