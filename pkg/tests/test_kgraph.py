from fractions import Fraction

import pytest

from kgraphrep.catalog import (
    BRIDGED_LOOPS_KG,
    LEDRAPPIER_A1,
    builtin_example,
    catalog,
    ledrappier_kg,
)
from kgraphrep.kgraph import (
    Edge,
    KGraph,
    KGraphError,
    KGParseError,
    adjacency_matrix,
    commuting_adjacency_problems,
    load_kgraph,
    serialize_kgraph,
    structural_flags,
    structural_problems,
    validate_factorization,
)


def test_load_bridged_loops():
    g = load_kgraph(BRIDGED_LOOPS_KG)
    assert len(g.vertices) == 2
    assert len(g.edges) == 3
    assert g.edge("g").range == "v1"
    assert g.edge("g").source == "v2"


def test_load_single_vertex_no_edges():
    g = load_kgraph("kgraph 1\nvertex v\n")
    flags = structural_flags(g)
    assert not flags.source_free
    assert flags.witnesses["source_free"] == [("v", 1)]


def test_parse_error_carries_line():
    with pytest.raises(KGParseError) as exc:
        load_kgraph("kgraph 1\nvertex v\nedge one e v v\n")
    assert exc.value.line == 3


def test_dangling_reference_rejected():
    with pytest.raises(KGraphError, match="unknown range"):
        load_kgraph("kgraph 1\nvertex v\nedge 1 e w v\n")


def test_duplicate_edge_rejected():
    with pytest.raises(KGraphError, match="duplicate edge"):
        load_kgraph("kgraph 1\nvertex v\nedge 1 e v v\nedge 1 e v v\n")


def test_missing_square_rejected():
    text = "kgraph 2\nvertex v\nedge 1 a v v\nedge 2 b v v\n"
    with pytest.raises(KGraphError, match="missing square"):
        load_kgraph(text)


def test_non_bijective_square_rejected():
    # two color-1 loops, one color-2 loop: both pairs map to the same image
    text = (
        "kgraph 2\nvertex v\n"
        "edge 1 a v v\nedge 1 c v v\nedge 2 b v v\n"
        "square a b = b a\nsquare c b = b a\n"
    )
    with pytest.raises(KGraphError, match="injective"):
        load_kgraph(text)


def test_structural_problems_witness():
    g = KGraph(
        2,
        ["v"],
        [Edge("a", 1, "v", "v"), Edge("c", 1, "v", "v"), Edge("b", 2, "v", "v")],
        {("a", "b"): ("b", "a"), ("c", "b"): ("b", "a")},
    )
    probs = structural_problems(g)
    assert any("not injective" in p for p in probs)
    assert any("not surjective" in p for p in probs)


def test_bijectivity_failure_detected_by_validation():
    g = KGraph(
        2,
        ["v"],
        [Edge("a", 1, "v", "v"), Edge("c", 1, "v", "v"), Edge("b", 2, "v", "v")],
        {("a", "b"): ("b", "a"), ("c", "b"): ("b", "a")},
    )
    rep = validate_factorization(g, 2)
    assert not rep.passed
    assert any("injective" in p or "surjective" in p for p in rep.problems)


def test_roundtrip_serialization_bit_exact():
    for name in catalog():
        g = builtin_example(name).graph
        text = serialize_kgraph(g)
        g2 = load_kgraph(text)
        assert serialize_kgraph(g2) == text


def test_adjacency_bridged_loops():
    g = load_kgraph(BRIDGED_LOOPS_KG)
    assert adjacency_matrix(g, 1).entries == ((1, 1), (0, 1))


def test_adjacency_ledrappier_matches_printed_matrix():
    g = load_kgraph(ledrappier_kg())
    assert adjacency_matrix(g, 1).entries == LEDRAPPIER_A1


def test_adjacency_zero_color():
    g = load_kgraph("kgraph 2\nvertex v\nedge 1 a v v\nedge 2 b v v\nsquare a b = b a\n")
    # both colors populated here; a color with no edges gives the zero matrix
    g2 = KGraph(2, ["v"], [Edge("a", 1, "v", "v")], {})
    assert adjacency_matrix(g2, 2).entries == ((0,),)


def test_adjacency_matrices_commute_on_catalog():
    for name in catalog():
        g = builtin_example(name).graph
        assert commuting_adjacency_problems(g) == []


def test_factorization_validation_passes_catalog():
    for name in ["bridged-loops", "swap-loop", "loop-fan", "ledrappier", "free-rank2"]:
        g = builtin_example(name).graph
        assert validate_factorization(g, 2).passed


def test_one_graph_vacuous_squares():
    g = load_kgraph(BRIDGED_LOOPS_KG)
    rep = validate_factorization(g, 3)
    assert rep.passed


def test_flags_bridged_loops():
    flags = structural_flags(load_kgraph(BRIDGED_LOOPS_KG))
    assert flags.row_finite and flags.source_free and flags.sink_free


def test_flags_truncated_marker():
    e = builtin_example("twin-chains")
    flags = structural_flags(e.graph)
    assert flags.truncated
    assert flags.source_free  # loop closure keeps the truncation source-free
    assert not flags.sink_free  # the root emits nothing, as in the full graph

def test_hexagon_route_check_rank3():
    # rank-3 free graph: one loop per color, all squares trivial
    text = (
        "kgraph 3\nvertex v\n"
        "edge 1 a v v\nedge 2 b v v\nedge 3 c v v\n"
        "square a b = b a\nsquare a c = c a\nsquare b c = c b\n"
    )
    g = load_kgraph(text)
    assert validate_factorization(g, 2).passed
