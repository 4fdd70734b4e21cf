import random

import pytest

from kgraphrep.catalog import BRIDGED_LOOPS_KG, LOOP_FAN_KG, builtin_example, catalog
from kgraphrep.degrees import add, basis, degrees_upto, diag, ones, total, zero
from kgraphrep.infpaths import (
    InfPathError,
    in_cylinder,
    inf_path_eq,
    is_cofinal,
    make_inf_path,
    parse_inf_path,
    periodic_pairs,
    prefix_path,
    reach_set,
    render_inf_path,
    segment,
    shift,
    subgroup_basis,
    in_subgroup,
    tail_set,
    window_eq,
)
from kgraphrep.kgraph import KGraphError, load_kgraph
from kgraphrep.paths import compose, edge_path, enumerate_paths, render_path, vertex_path


@pytest.fixture(scope="module")
def g():
    return load_kgraph(BRIDGED_LOOPS_KG)


@pytest.fixture(scope="module")
def fan():
    return load_kgraph(LOOP_FAN_KG)


def _x(g, prefix, cycle):
    return make_inf_path(prefix, cycle)


def test_make_inf_path_examples(g):
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    gf = _x(g, br, f)
    assert render_inf_path(gf) == "g * f"
    finf = _x(g, vertex_path(g, "v2"), f)
    assert render_inf_path(finf) == "v2 * f"
    einf = _x(g, vertex_path(g, "v1"), e)
    assert render_inf_path(einf) == "v1 * e"


def test_make_inf_path_rejects_zero_cycle_coordinate():
    led = builtin_example("ledrappier").graph
    a = edge_path(led, "x11")
    with pytest.raises(InfPathError, match="zero degree"):
        make_inf_path(vertex_path(led, "p1"), a)


def test_make_inf_path_rejects_endpoint_mismatch(g):
    with pytest.raises(InfPathError):
        make_inf_path(edge_path(g, "g"), edge_path(g, "e"))


def test_canonicalization_absorbs_redundancy(g):
    br, f = edge_path(g, "g"), edge_path(g, "f")
    gf = _x(g, br, f)
    same = _x(g, compose(br, f), compose(f, f))
    assert gf == same
    assert inf_path_eq(gf, same)
    assert window_eq(gf, same)


def test_segment_unrolls(g):
    f = edge_path(g, "f")
    finf = _x(g, vertex_path(g, "v2"), f)
    assert render_path(segment(finf, (0,), (2,))) == "f.f"
    assert segment(finf, (1,), (1,)) == vertex_path(g, "v2")
    br = edge_path(g, "g")
    gf = _x(g, br, f)
    assert segment(gf, (0,), (1,)) == br


def test_shift_examples(g):
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    gf = _x(g, br, f)
    assert shift(gf, 1) == _x(g, vertex_path(g, "v2"), f)
    assert shift(gf, 0) == gf
    einf = _x(g, vertex_path(g, "v1"), e)
    assert shift(einf, 5) == einf


def test_shift_composes(g):
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    x = _x(g, compose(e, compose(e, br)), f)
    for m in range(4):
        for n in range(4):
            assert shift(shift(x, m), n) == shift(x, m + n)


def test_prefix_path_inverts_shift(g):
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    gf = _x(g, br, f)
    egf = prefix_path(e, gf)
    assert render_inf_path(egf) == "e.g * f"
    assert shift(egf, (1,)) == gf
    assert prefix_path(vertex_path(g, "v1"), egf) == egf


def test_prefix_mismatch(g):
    f = edge_path(g, "f")
    finf = _x(g, vertex_path(g, "v2"), f)
    with pytest.raises(InfPathError, match="cannot prefix"):
        prefix_path(edge_path(g, "e"), finf)


def test_inf_path_eq_distinct(g):
    e, f = edge_path(g, "e"), edge_path(g, "f")
    assert not inf_path_eq(_x(g, vertex_path(g, "v1"), e), _x(g, vertex_path(g, "v2"), f))


def test_tail_sets(g):
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    finf = _x(g, vertex_path(g, "v2"), f)
    assert tail_set(finf) == frozenset({finf})
    gf = _x(g, br, f)
    assert tail_set(gf) == frozenset({gf, finf})
    e2gf = _x(g, compose(e, compose(e, br)), f)
    assert len(tail_set(e2gf)) == 4


def test_tail_set_rank2_mixed_cycle():
    led = builtin_example("ledrappier").graph
    p = enumerate_paths(led, "p1", (1, 1))[0]
    x = make_inf_path(vertex_path(led, "p1"), p)
    ts = tail_set(x)
    assert x in ts
    for y in ts:
        for i in (1, 2):
            assert shift(y, basis(2, i)) in ts


def test_parse_render_inf_path(g):
    for text in ("g * f", "v2 * f", "v1 * e", "e.e.g * f"):
        x = parse_inf_path(g, text)
        assert render_inf_path(x) == text


def test_cofinal_witnesses(g, fan):
    rep = is_cofinal(g)
    assert not rep.verdict
    assert rep.witness[0] == "v2"
    assert render_inf_path(rep.witness[1]) == "v1 * e"

    rep = is_cofinal(fan)
    assert not rep.verdict
    assert rep.witness[0] == "w"
    assert render_inf_path(rep.witness[1]) == "u * k"


def test_cofinal_single_vertex_multiloop():
    g = load_kgraph("kgraph 1\nvertex v\nedge 1 a v v\nedge 1 b v v\n")
    assert is_cofinal(g).verdict


def test_cofinal_refuses_sources():
    g = load_kgraph("kgraph 1\nvertex v\n")
    with pytest.raises(KGraphError, match="source-free"):
        is_cofinal(g)


def _enumerate_small_paths(g, budget):
    """All eventually periodic paths with |d(prefix)|+|d(cycle)| <= budget."""
    out = set()
    for pre, cyc in _enumerate_raw_reps(g, budget):
        out.add(make_inf_path(pre, cyc))
    return out


def _enumerate_raw_reps(g, budget):
    for v in g.vertices:
        for dp in degrees_upto(g.rank, diag(g.rank, budget)):
            if total(dp) > budget:
                continue
            for pre in enumerate_paths(g, v, dp):
                rest = budget - total(dp)
                for dc in degrees_upto(g.rank, diag(g.rank, rest)):
                    if not all(c >= 1 for c in dc) or total(dc) > rest:
                        continue
                    for cyc in enumerate_paths(g, pre.source, dc):
                        if cyc.source == cyc.range:
                            yield pre, cyc


def brute_force_cofinal(g, budget=6):
    """Independent cofinality oracle: quantify over all raw eventually
    periodic representations up to the size budget, testing the diagonal
    trail against each vertex reach set."""
    from kgraphrep.infpaths import diagonal_trail

    trails = [diagonal_trail(pre, cyc) for pre, cyc in _enumerate_raw_reps(g, budget)]
    for v in g.vertices:
        reach = reach_set(g, v)
        for trail in trails:
            if not (trail & reach):
                return False, v
    return True, None


def test_cofinal_brute_force_agreement_on_catalog():
    for name in catalog():
        g = builtin_example(name).graph
        if name in ("twin-chains", "ledrappier-chain"):
            continue  # larger truncations covered in the acceptance suite
        algo = is_cofinal(g)
        verdict, _ = brute_force_cofinal(g, 6 if g.rank == 1 else 4)
        assert algo.verdict == verdict, name


def test_periodic_pairs_bridged_loops(g):
    rep = periodic_pairs(g, 4)
    rendered = {(render_path(l), render_path(n)) for l, n, _ in rep.certified_pairs}
    assert ("f", "v2") in rendered
    assert ("g.f", "g") in rendered
    assert rep.per_group == [(1,)]
    assert rep.h_per == ["v2"]


def test_periodic_pairs_sampled_continuations(g):
    rep = periodic_pairs(g, 4)
    rng = random.Random(11)
    paths = sorted(
        _enumerate_small_paths(g, 6), key=render_inf_path
    )
    for lam, nu, depth in rep.certified_pairs:
        conts = [x for x in paths if x.range == lam.source]
        for _ in range(100):
            x = rng.choice(conts)
            N = diag(g.rank, depth + 2)
            a = segment(prefix_path(lam, x), zero(g.rank), N)
            b = segment(prefix_path(nu, x), zero(g.rank), N)
            assert a == b


def test_two_distinct_loops_kill_periodicity():
    g = load_kgraph("kgraph 1\nvertex v\nedge 1 a v v\nedge 1 b v v\n")
    rep = periodic_pairs(g, 4)
    assert rep.per_group == []
    assert rep.certified_pairs == []


def test_subgroup_helpers():
    assert subgroup_basis([(2, 0), (0, 3)], 2) == [(2, 0), (0, 3)]
    assert subgroup_basis([(2, 2), (4, 4)], 2) == [(2, 2)]
    assert in_subgroup((6, 6), [(2, 2)])
    assert not in_subgroup((3, 3), [(2, 2)])
    assert in_subgroup((0, 0), [])
    assert not in_subgroup((1, 0), [])


def test_in_cylinder(g):
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    gf = make_inf_path(br, f)
    assert in_cylinder(gf, br)
    assert in_cylinder(gf, vertex_path(g, "v1"))
    assert not in_cylinder(gf, e)
