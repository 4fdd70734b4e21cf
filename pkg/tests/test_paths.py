from fractions import Fraction

import pytest

from kgraphrep.catalog import BRIDGED_LOOPS_KG, builtin_example, ledrappier_kg
from kgraphrep.degrees import degrees_upto, join, sub
from kgraphrep.kgraph import load_kgraph
from kgraphrep.paths import (
    CylUnion,
    PathError,
    compose,
    cyl_empty,
    cyl_intersect,
    cyl_is_partition,
    cyl_of,
    cyl_subtract,
    cyl_union,
    edge_path,
    enumerate_paths,
    extends,
    factorize,
    lambda_min,
    mce,
    parse_path,
    render_cyl,
    render_path,
    segment_of,
    vertex_path,
)


@pytest.fixture(scope="module")
def g():
    return load_kgraph(BRIDGED_LOOPS_KG)


@pytest.fixture(scope="module")
def led():
    return load_kgraph(ledrappier_kg())


def test_compose_chain(g):
    e, br = edge_path(g, "e"), edge_path(g, "g")
    eg = compose(e, br)
    assert render_path(eg) == "e.g"
    assert eg.degree == (2,)
    assert eg.range == "v1" and eg.source == "v2"


def test_compose_identity(g):
    lam = edge_path(g, "g")
    assert compose(vertex_path(g, "v1"), lam) == lam
    assert compose(lam, vertex_path(g, "v2")) == lam


def test_compose_mismatch_raises(g):
    with pytest.raises(PathError, match="cannot compose"):
        compose(edge_path(g, "e"), edge_path(g, "f"))


def test_compose_normal_form_ledrappier(led):
    # one color-1 edge then one color-2 edge lists the color-1 edge first
    x = edge_path(led, "x11")
    candidates = led.edges_with_range(x.source, 2)
    y = edge_path(led, candidates[0])
    p = compose(x, y)
    assert p.degree == (1, 1)
    assert p.segments[0] and p.segments[1]
    assert p.segments[0][0] == "x11"


def test_factorize_trivial_splits(g):
    lam = compose(edge_path(g, "e"), edge_path(g, "g"))
    mu, nu = factorize(lam, (0,))
    assert mu == vertex_path(g, "v1") and nu == lam
    mu, nu = factorize(lam, lam.degree)
    assert mu == lam and nu == vertex_path(g, "v2")


def test_factorize_single_square(led):
    # ef with a degree-(1,1) factorization both ways round
    for v in led.vertices:
        for p in enumerate_paths(led, v, (1, 1)):
            f2, e2 = factorize(p, (0, 1))
            assert f2.degree == (0, 1) and e2.degree == (1, 0)
            assert compose(f2, e2) == p
            e1, f1 = factorize(p, (1, 0))
            assert compose(e1, f1) == p


def test_factorize_out_of_range(g):
    with pytest.raises(PathError, match="exceeds"):
        factorize(edge_path(g, "e"), (2,))


def test_enumerate_counts(g):
    assert [render_path(p) for p in enumerate_paths(g, "v1", (1,))] == ["e", "g"]
    assert [render_path(p) for p in enumerate_paths(g, "v1", (0,))] == ["v1"]


def test_enumerate_ledrappier_degree11_count(led):
    for v in led.vertices:
        assert len(enumerate_paths(led, v, (1, 1))) == 4


def test_lambda_min_and_mce(g):
    e, br = edge_path(g, "e"), edge_path(g, "g")
    eg = compose(e, br)
    assert lambda_min(e, e) == {(vertex_path(g, "v1"), vertex_path(g, "v1"))}
    assert lambda_min(e, br) == set()
    assert mce(e, br) == set()
    assert mce(e, eg) == {eg}
    assert lambda_min(e, eg) == {(br, vertex_path(g, "v2"))}
    assert mce(e, e) == {e}


def test_cyl_intersect(g):
    e, br = edge_path(g, "e"), edge_path(g, "g")
    eg = compose(e, br)
    A = cyl_of(g, [e])
    B = cyl_of(g, [eg])
    assert cyl_intersect(A, B).parts == (eg,)
    assert cyl_intersect(A, A).parts == (e,)
    assert cyl_intersect(A, cyl_of(g, [br])).is_empty()


def test_cyl_subtract(g):
    v1 = vertex_path(g, "v1")
    e, br = edge_path(g, "e"), edge_path(g, "g")
    out = cyl_subtract(cyl_of(g, [v1]), cyl_of(g, [e]))
    assert out.parts == (br,)
    A = cyl_of(g, [e])
    assert cyl_subtract(A, A).is_empty()
    v2 = vertex_path(g, "v2")
    assert cyl_subtract(cyl_of(g, [v1]), cyl_of(g, [v2])).parts == (v1,)


def test_cyl_is_partition(g):
    v1 = vertex_path(g, "v1")
    e, br = edge_path(g, "e"), edge_path(g, "g")
    assert cyl_is_partition(g, v1, [e, br])
    assert not cyl_is_partition(g, v1, [e])
    assert cyl_is_partition(g, v1, [v1])
    assert not cyl_is_partition(g, v1, [e, e, br])


def test_render_parse_roundtrip(g, led):
    for graph in (g, led):
        for v in graph.vertices:
            for d in degrees_upto(graph.rank, (2,) * graph.rank):
                for p in enumerate_paths(graph, v, d):
                    assert parse_path(graph, render_path(p)) == p


def test_parse_rejects_color_mismatch(led):
    with pytest.raises(PathError):
        parse_path(led, "y11|x11")


def test_render_cyl(g):
    e = edge_path(g, "e")
    assert render_cyl(cyl_of(g, [e])) == "Z(e)"
    assert render_cyl(cyl_empty(g)) == "0"


def _cyl_model(c, N):
    """finite-depth set model: all degree-N extensions of the union"""
    out = set()
    for p in c.parts:
        for alpha in enumerate_paths(p.graph, p.source, sub(N, p.degree)):
            out.add(compose(p, alpha))
    return out


def test_cyl_ops_vs_set_model(g):
    N = (3,)
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    v1 = vertex_path(g, "v1")
    sets = [
        cyl_of(g, [v1]),
        cyl_of(g, [e]),
        cyl_of(g, [br]),
        cyl_of(g, [compose(e, br)]),
        cyl_of(g, [e, br]),
    ]
    for A in sets:
        for B in sets:
            mA, mB = _cyl_model(A, N), _cyl_model(B, N)
            assert _cyl_model(cyl_intersect(A, B), N) == mA & mB
            assert _cyl_model(cyl_subtract(A, B), N) == mA - mB
            assert _cyl_model(cyl_union(A, B), N) == mA | mB


def test_cyl_union_stays_disjoint(g):
    e, br = edge_path(g, "e"), edge_path(g, "g")
    u = cyl_union(cyl_of(g, [e]), cyl_of(g, [vertex_path(g, "v1")]))
    for i, p in enumerate(u.parts):
        for q in u.parts[i + 1 :]:
            assert not mce(p, q)


def test_extends(g):
    e = edge_path(g, "e")
    eg = compose(e, edge_path(g, "g"))
    assert extends(eg, e)
    assert not extends(e, eg)


def test_segment_of(g):
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    p = compose(e, compose(br, f))
    assert segment_of(p, (1,), (2,)) == br
