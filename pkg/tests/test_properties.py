"""Randomized oracle-agreement suites over small graphs.

Four suites of 250 seeded cases each: minimal common extensions against
brute-force extension enumeration, the cylinder algebra against a
finite-depth set model, the factorize/compose identity, and the
shift/prefix coding identities on eventually periodic paths.
"""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphgen import random_graph, random_inf_path, random_one_graph, random_path, random_two_graph
from kgraphrep.degrees import add, degrees_upto, join, leq, sub, total, zero
from kgraphrep.infpaths import (
    make_inf_path,
    prefix_path,
    segment,
    shift,
    window_eq,
)
from kgraphrep.kgraph import load_kgraph, serialize_kgraph, commuting_adjacency_problems
from kgraphrep.paths import (
    compose,
    cyl_intersect,
    cyl_of,
    cyl_subtract,
    cyl_union,
    enumerate_paths,
    extends,
    factorize,
    lambda_min,
    mce,
)
from kgraphrep.scalars import MixedRadicalSum, Radical

CASES = 250


def test_mce_vs_brute_force_extensions():
    rng = random.Random(101)
    done = 0
    while done < CASES:
        g = random_graph(rng)
        alpha = random_path(rng, g, 2)
        beta = random_path(rng, g, 2)
        if total(alpha.degree) + total(beta.degree) > 4:
            continue
        done += 1
        D = join(alpha.degree, beta.degree)
        brute = set()
        for v in [alpha.range]:
            for xi in enumerate_paths(g, v, D):
                if extends(xi, alpha) and extends(xi, beta):
                    brute.add(xi)
        if alpha.range != beta.range:
            brute = set()
        assert mce(alpha, beta) == brute
        # lambda_min pairs recompose to exactly the brute extensions
        pairs = lambda_min(alpha, beta)
        assert {compose(alpha, a) for a, _ in pairs} == brute
        for a, b in pairs:
            assert compose(alpha, a) == compose(beta, b)


def _cyl_model(c, N):
    out = set()
    for p in c.parts:
        for ext in enumerate_paths(p.graph, p.source, sub(N, p.degree)):
            out.add(compose(p, ext))
    return out


def test_cylinder_algebra_vs_set_model():
    rng = random.Random(202)
    done = 0
    while done < CASES:
        g = random_graph(rng)
        N = (2,) * g.rank
        ps = [random_path(rng, g, 2) for _ in range(3)]
        if any(not leq(p.degree, N) for p in ps):
            continue
        done += 1
        A = cyl_of(g, ps[:2])
        B = cyl_of(g, ps[2:])
        mA, mB = _cyl_model(A, N), _cyl_model(B, N)
        assert _cyl_model(cyl_intersect(A, B), N) == mA & mB
        assert _cyl_model(cyl_subtract(A, B), N) == mA - mB
        assert _cyl_model(cyl_union(A, B), N) == mA | mB


def test_factorize_compose_identity():
    rng = random.Random(303)
    done = 0
    while done < CASES:
        g = random_graph(rng)
        mu = random_path(rng, g, 2)
        options = [
            nu
            for d in degrees_upto(g.rank, (2,) * g.rank)
            for nu in enumerate_paths(g, mu.source, d)
        ]
        nu = rng.choice(options)
        done += 1
        lam = compose(mu, nu)
        mu2, nu2 = factorize(lam, mu.degree)
        assert (mu2, nu2) == (mu, nu)
        # the two-sided split agrees as well
        head, tail = factorize(lam, nu2.degree) if leq(nu2.degree, lam.degree) else (None, None)
        if head is not None:
            assert compose(head, tail) == lam


def test_shift_prefix_coding_identities():
    rng = random.Random(404)
    done = 0
    while done < CASES:
        g = random_graph(rng)
        x = random_inf_path(rng, g)
        if x is None:
            continue
        done += 1
        k = g.rank
        m = tuple(rng.randint(0, 2) for _ in range(k))
        n = tuple(rng.randint(0, 2) for _ in range(k))
        assert shift(shift(x, m), n) == shift(x, add(m, n))
        lam = segment(x, zero(k), m)
        assert prefix_path(lam, shift(x, m)) == x
        # cylinder membership window agrees with the canonical equality
        y = shift(x, m)
        assert window_eq(prefix_path(lam, y), x)
        assert segment(x, m, add(m, n)) == segment(shift(x, m), zero(k), n)


def test_random_graph_roundtrip_and_commuting():
    rng = random.Random(505)
    for _ in range(40):
        g = random_graph(rng)
        text = serialize_kgraph(g)
        g2 = load_kgraph(text)
        assert serialize_kgraph(g2) == text
        assert commuting_adjacency_problems(g) == []


def test_random_two_graph_factorization_validates():
    from kgraphrep.kgraph import validate_factorization

    rng = random.Random(606)
    for _ in range(12):
        g = random_two_graph(rng)
        assert validate_factorization(g, 2).passed


# -- scalar model ------------------------------------------------------------

fractions_st = st.fractions(
    min_value=Fraction(-64), max_value=Fraction(64), max_denominator=64
)
positive_fractions = st.fractions(
    min_value=Fraction(1, 64), max_value=Fraction(64), max_denominator=64
)


@given(positive_fractions)
@settings(max_examples=200, deadline=None)
def test_radical_sqrt_squares_back(q):
    r = Radical.sqrt(q)
    assert r.square() == q
    assert (r * r).as_fraction() == q


@given(positive_fractions, positive_fractions)
@settings(max_examples=200, deadline=None)
def test_radical_mul_div(a, b):
    ra, rb = Radical.sqrt(a), Radical.sqrt(b)
    prod = ra * rb
    assert prod.square() == a * b
    quot = ra / rb
    assert quot.square() == a / b
    assert (prod / rb) == ra


@given(positive_fractions, fractions_st)
@settings(max_examples=200, deadline=None)
def test_radical_same_root_addition(a, c):
    r = Radical.sqrt(a)
    scaled = Radical(Fraction(c), r.root)
    s = r + scaled
    assert s.root == r.root or s.is_zero()
    assert abs(float(s) - (float(r) + float(scaled))) < 1e-9


def test_radical_mixed_sum_raises():
    with pytest.raises(MixedRadicalSum):
        Radical.sqrt(2) + Radical.sqrt(3)
    # zero absorbs regardless of roots
    assert Radical.sqrt(2) + Radical.of(0) == Radical.sqrt(2)
