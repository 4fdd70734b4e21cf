import random
from fractions import Fraction

import pytest

from kgraphrep.catalog import builtin_example
from kgraphrep.degrees import degrees_upto, degrees_with_total_upto
from kgraphrep.infpaths import make_inf_path, render_inf_path
from kgraphrep.kgraph import load_kgraph
from kgraphrep.measures import (
    AtomicMeasure,
    GeometricFamily,
    MeasureError,
    PerronError,
    atomic_measure,
    check_additivity,
    cyl_mass,
    eigen_measure,
    invariant_components,
    is_invariant_atom_set,
    minimal_invariant_sets,
    mutually_singular,
    perron_eigenvector,
)
from kgraphrep.paths import compose, cyl_of, cyl_subtract, edge_path, enumerate_paths, vertex_path


@pytest.fixture(scope="module")
def ckx():
    return builtin_example("bridged-loops")


@pytest.fixture(scope="module")
def led():
    return builtin_example("ledrappier")


def test_eigen_measure_values(led):
    g = led.graph
    mu = led.eigen
    for v in g.vertices:
        assert mu.mass(vertex_path(g, v)) == 1
        for lam in enumerate_paths(g, v, (1, 1)):
            assert mu.mass(lam) == Fraction(1, 4)


def test_eigen_measure_rejects_wrong_vector(led):
    g = led.graph
    with pytest.raises(MeasureError, match="eigen equation"):
        eigen_measure(g, {v: Fraction(i + 1) for i, v in enumerate(g.vertices)}, (2, 2))


def test_eigen_additivity_exhaustive(led):
    g = led.graph
    mu = led.eigen
    for v in g.vertices:
        for d in degrees_with_total_upto(2, 4):
            for lam in enumerate_paths(g, v, d):
                for m in degrees_upto(2, (2, 2)):
                    assert check_additivity(mu, lam, m)


def test_eigen_random_partitions_well_defined(led):
    g = led.graph
    mu = led.eigen
    rng = random.Random(5)
    lam = vertex_path(g, g.vertices[0])
    assert check_additivity(mu, lam, (2, 2), rng=rng, rounds=50)


def test_ledrappier_chain_eigen_accepted_and_additive():
    e = builtin_example("ledrappier-chain")
    g, mu = e.graph, e.eigen
    # identity holds wherever the refinement stays among interior rows
    root_vertices = [v for v in g.vertices if v.startswith("b0")]
    for v in root_vertices:
        for d in degrees_with_total_upto(2, 2):
            for lam in enumerate_paths(g, v, d):
                if not g.is_interior_vertex(lam.source):
                    continue
                assert check_additivity(mu, lam, (1, 0))
                assert check_additivity(mu, lam, (0, 1))


def test_atomic_measure_masses(ckx):
    g, mu = ckx.graph, ckx.atomic
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    assert mu.mass_of_cyl(f) == Fraction(1, 4)
    en = vertex_path(g, "v1")
    for n in range(8):
        assert mu.mass_of_cyl(en) == Fraction(1, 4) + Fraction(1, 2 ** (n + 1))
        assert mu.mass_of_cyl(compose(en, br)) == Fraction(1, 2 ** (n + 2))
        en = compose(en, e)
    assert mu.total_mass() == 1


def test_atomic_single_atom_membership(ckx):
    g = ckx.graph
    f = edge_path(g, "f")
    x = make_inf_path(vertex_path(g, "v2"), f)
    mu = atomic_measure(g, [(x, Fraction(1))], [])
    assert mu.mass_of_cyl(f) == 1
    assert mu.mass_of_cyl(edge_path(g, "e")) == 0


def test_atomic_rejects_bad_weights(ckx):
    g = ckx.graph
    f = edge_path(g, "f")
    x = make_inf_path(vertex_path(g, "v2"), f)
    with pytest.raises(MeasureError, match="nonpositive"):
        atomic_measure(g, [(x, Fraction(0))], [])
    with pytest.raises(MeasureError, match="conflicting duplicate"):
        atomic_measure(g, [(x, Fraction(1)), (x, Fraction(2))], [])
    # equal duplicates merge
    mu = atomic_measure(g, [(x, Fraction(1)), (x, Fraction(1))], [])
    assert mu.weight(x) == 1


def test_cyl_mass_on_unions(ckx):
    g, mu = ckx.graph, ckx.atomic
    from kgraphrep.measures import CylMeasure

    wrapped = CylMeasure(g, atomic=mu)
    v1 = vertex_path(g, "v1")
    e = edge_path(g, "e")
    diff = cyl_subtract(cyl_of(g, [v1]), cyl_of(g, [e]))
    assert cyl_mass(wrapped, diff) == Fraction(1, 4)  # Z(g)
    assert cyl_mass(wrapped, cyl_of(g, [])) == 0


def test_atomic_check_additivity(ckx):
    g, mu = ckx.graph, ckx.atomic
    from kgraphrep.measures import CylMeasure

    wrapped = CylMeasure(g, atomic=mu)
    for v in g.vertices:
        for d in degrees_with_total_upto(1, 3):
            for lam in enumerate_paths(g, v, d):
                for m in ((0,), (1,), (2,)):
                    assert check_additivity(wrapped, lam, m)


def test_family_budget_guard(ckx):
    g = ckx.graph
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    fam = GeometricFamily(e, br, f, Fraction(1, 2), Fraction(1, 4), 4)
    mu = atomic_measure(g, [], [fam], truncation=4)
    deep = vertex_path(g, "v1")
    for _ in range(8):
        deep = compose(deep, e)
    with pytest.raises(MeasureError, match="budget"):
        mu.mass_of_cyl(deep)


def test_invariant_components_bridged_loops(ckx):
    dec = invariant_components(ckx.atomic)
    assert len(dec.components) == 2
    assert not dec.jointly_ergodic
    sizes = sorted(len(c) for c in dec.components)
    assert sizes[0] == 1  # the isolated pure-loop atom


def test_invariant_components_loop_fan_restriction():
    e = builtin_example("loop-fan")
    dec = invariant_components(e.atomic)
    assert len(dec.components) == 2
    # restrict to the f-side component: minimal, hence one class
    f_side = next(
        c for c in dec.components
        if any(x.cycle == edge_path(e.graph, "f") for x in c)
    )
    sub = invariant_components(e.atomic.restrict(set(f_side)))
    assert len(sub.components) == 1 and sub.jointly_ergodic


def test_single_atom_component(ckx):
    g = ckx.graph
    f = edge_path(g, "f")
    x = make_inf_path(vertex_path(g, "v2"), f)
    dec = invariant_components(atomic_measure(g, [(x, Fraction(1))], []))
    assert len(dec.components) == 1 and dec.jointly_ergodic


def test_minimal_invariant_sets_and_merge_split(ckx):
    comps = minimal_invariant_sets(ckx.atomic)
    assert len(comps) == 2
    mu = ckx.atomic
    # each component invariant; their union invariant; any strict nonempty
    # subset of a component is not invariant
    for c in comps:
        assert is_invariant_atom_set(mu, set(c))
    assert is_invariant_atom_set(mu, set(comps[0]) | set(comps[1]))
    big = max(comps, key=len)
    strict = set(list(big)[:1])
    assert not is_invariant_atom_set(mu, strict)


def test_mutually_singular(ckx):
    comps = minimal_invariant_sets(ckx.atomic)
    m1 = ckx.atomic.restrict(set(comps[0]))
    m2 = ckx.atomic.restrict(set(comps[1]))
    assert mutually_singular(m1, m2)
    assert mutually_singular(m2, m1)
    assert not mutually_singular(m1, m1)


def test_perron_ledrappier(led):
    xi, beta = perron_eigenvector(led.graph, tol=1e-10)
    assert abs(beta[0] - 2) < 1e-8 and abs(beta[1] - 2) < 1e-8
    for v in led.graph.vertices:
        assert abs(xi[v] - 0.25) < 1e-8


def test_perron_trivial_and_multi_loop():
    g = load_kgraph("kgraph 1\nvertex v\nedge 1 a v v\n")
    xi, beta = perron_eigenvector(g)
    assert xi["v"] == 1.0 and abs(beta[0] - 1) < 1e-9
    g3 = load_kgraph(
        "kgraph 1\nvertex v\nedge 1 a v v\nedge 1 b v v\nedge 1 c v v\n"
    )
    _, beta = perron_eigenvector(g3)
    assert abs(beta[0] - 3) < 1e-8


def test_perron_rejects_disconnected():
    g = load_kgraph(
        "kgraph 1\nvertex v\nvertex w\nedge 1 a v v\nedge 1 b w w\nedge 1 c w w\n"
    )
    with pytest.raises(PerronError):
        perron_eigenvector(g, tol=1e-12)
