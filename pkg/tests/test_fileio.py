import numpy as np
import pytest

from perturbnet.fileio import (
    FormatError,
    format_observation,
    format_outcome,
    parse_observation,
    parse_outcome,
)
from perturbnet.fixtures import TWO_ROUTE_EDGES, two_route_example
from perturbnet.netgraph import parse_edge_list
from perturbnet.perturbsim import simulate_si_heterogeneous
from perturbnet.scores import ScoreVector, format_scores, parse_scores


def test_observation_round_trip():
    net, obs = two_route_example()
    again = parse_observation(format_observation(net, obs), net)
    assert again.as_dict() == obs.as_dict()


def test_observation_errors():
    net = parse_edge_list("a b\nb c")
    assert parse_observation("# comment\na\t1\n\nc 0\n", net).as_dict() == {0: 1, 2: 0}
    with pytest.raises(FormatError, match="not in the network"):
        parse_observation("z\t1\n", net)
    with pytest.raises(FormatError, match="line 1"):
        parse_observation("a\t2\n", net)
    with pytest.raises(FormatError, match="twice"):
        parse_observation("a\t1\na\t0\n", net)


def test_outcome_round_trip_and_header():
    net = parse_edge_list(TWO_ROUTE_EDGES)
    out = simulate_si_heterogeneous(net, 0.2, 0.8, seed=5)
    text = format_outcome(net, out)
    assert text.startswith("# mode: heterogeneous\n")
    assert "# seed: 5" in text and f"# root: {net.label(out.root)}" in text
    again = parse_outcome(text, net)
    assert np.array_equal(again.state, out.state)
    assert (again.root, again.seed, again.attempts) == (out.root, out.seed, out.attempts)
    assert again.generator_params == out.generator_params


def test_outcome_missing_node():
    net = parse_edge_list("a b\nb c")
    with pytest.raises(FormatError):
        parse_outcome("# root: a\n# params: {}\n# seed: 1\na\t1\nb\t0\n", net)


def test_scores_format():
    net = parse_edge_list("a b\nb c")
    scores = ScoreVector(np.array([1 / 3, 0.5, 1e-12]), "exposure")
    text = format_scores(net, scores)
    assert text.splitlines() == ["# method: exposure", "a\t0.333333333", "b\t0.5", "c\t1e-12"]
    back = parse_scores(text, net)
    assert back.method_tag == "exposure" and np.allclose(back.score, scores.score, rtol=1e-8)


def test_scores_must_be_finite():
    with pytest.raises(ValueError):
        ScoreVector(np.array([np.nan]), "x")
