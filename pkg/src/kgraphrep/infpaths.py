"""Eventually periodic infinite paths, shifts, orbits, cofinality, periodicity.

An infinite path is stored as a prefix plus a repeating cycle.  Every
such path also admits a *balanced* representation whose cycle degree is
a multiple of (1,...,1): the degree-C blocks read off at successive
diagonal positions form the orbit of a deterministic map on finitely
many finite paths, so the diagonal shifts must eventually repeat.  From
the balanced form we derive a canonical representative (the shortest
diagonal prefix followed by the shortest balanced cycle), which makes
path equality syntactic and hashing sound.

Equality of two shifts of paths sharing a cycle degree C reduces to
segment agreement on a finite window: beyond both prefixes each side is
C-periodic, so agreeing on one more C-block pins both tails.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .degrees import (
    Degree,
    add,
    basis,
    diag,
    join,
    leq,
    meet,
    ones,
    scale,
    sub,
    total,
    zero,
)
from .kgraph import KGraph, KGraphError
from .paths import (
    FinPath,
    PathError,
    compose,
    enumerate_paths,
    factorize,
    render_path,
    segment_of,
    vertex_path,
)

_TAIL_CAP = 100000


class InfPathError(PathError):
    """Ill-formed infinite path or illegal operation."""


@dataclass(frozen=True)
class InfPath:
    """Canonical eventually periodic infinite path: prefix then cycle forever.

    Always construct through :func:`make_inf_path` (or the internal
    canonicalizer); the dataclass equality is only meaningful on
    canonical representatives.
    """

    prefix: FinPath
    cycle: FinPath

    @property
    def graph(self) -> KGraph:
        return self.prefix.graph

    @property
    def range(self) -> str:
        return self.prefix.range

    def __repr__(self) -> str:
        return f"InfPath({render_inf_path(self)})"


def make_inf_path(prefix: FinPath, cycle: FinPath) -> InfPath:
    """Validate and canonicalize a prefix+cycle representation."""
    if prefix.graph is not cycle.graph:
        raise InfPathError("prefix and cycle on different graphs")
    if cycle.range != cycle.source:
        raise InfPathError(
            f"cycle {render_path(cycle)} has range {cycle.range} != source {cycle.source}"
        )
    if prefix.source != cycle.range:
        raise InfPathError(
            f"prefix source {prefix.source} does not meet cycle at {cycle.range}"
        )
    bad = [i + 1 for i, c in enumerate(cycle.degree) if c == 0]
    if bad:
        raise InfPathError(
            f"cycle {render_path(cycle)} has zero degree in color(s) {bad}"
        )
    return _canonical(prefix, cycle)


def parse_inf_path(g: KGraph, text: str) -> InfPath:
    """Parse `<prefix> * <cycle>` (either side in finite-path syntax)."""
    from .paths import parse_path

    if "*" not in text:
        raise InfPathError(f"infinite path {text!r}: expected `<prefix> * <cycle>`")
    pre_s, cyc_s = text.split("*", 1)
    return make_inf_path(parse_path(g, pre_s.strip()), parse_path(g, cyc_s.strip()))


def render_inf_path(x: InfPath) -> str:
    return f"{render_path(x.prefix)} * {render_path(x.cycle)}"


# -- raw segment extraction (representation-level, no canonical form) ----


def _raw_segment(prefix: FinPath, cycle: FinPath, a: Degree, b: Degree) -> FinPath:
    """x(a, b) for the path prefix.cycle^infinity."""
    D, C = prefix.degree, cycle.degree
    reps = 0
    for i in range(len(D)):
        need = b[i] - D[i]
        if need > 0:
            reps = max(reps, -(-need // C[i]))
    mat = prefix
    for _ in range(reps):
        mat = compose(mat, cycle)
    return segment_of(mat, a, b)


def _raw_shift_eq(
    prefix: FinPath, cycle: FinPath, m1: Degree, m2: Degree
) -> bool:
    """Whether the shifts of x = prefix.cycle^inf by m1 and m2 agree.

    Both shifts are C-periodic beyond their residual prefixes, so they
    agree as functors iff their segments agree out to the larger residual
    prefix plus one full C-block.
    """
    D, C = prefix.degree, cycle.degree
    p1 = sub(join(m1, D), m1)
    p2 = sub(join(m2, D), m2)
    w = add(join(p1, p2), C)
    return _raw_segment(prefix, cycle, m1, add(m1, w)) == _raw_segment(
        prefix, cycle, m2, add(m2, w)
    )


def _canonical(prefix: FinPath, cycle: FinPath) -> InfPath:
    g = prefix.graph
    k = g.rank
    D, C = prefix.degree, cycle.degree
    dmax = max(D) if D else 0

    # Diagonal block orbit: K_p = x(p.1, p.1 + C) for p >= dmax determines
    # the tail, and K_{p+1} = (K_p K_p)(1, 1 + C) is a function of K_p, so
    # the first repeat of this deterministic orbit gives the minimal
    # eventual diagonal period s0 of the deep tail.
    one = ones(k)
    seen: Dict[FinPath, int] = {}
    p = dmax
    K = _raw_segment(prefix, cycle, diag(k, p), add(diag(k, p), C))
    while True:
        if K in seen:
            entry, s0 = seen[K], p - seen[K]
            break
        seen[K] = p
        p += 1
        K = segment_of(compose(K, K), one, add(one, C))
        if p - dmax > _TAIL_CAP:
            raise InfPathError("cycle detection exceeded cap; representation too large")

    # Minimal diagonal position from which the tail is s0-periodic.
    pstar = entry
    while pstar > 0 and _raw_shift_eq(
        prefix, cycle, diag(k, pstar - 1), diag(k, pstar - 1 + s0)
    ):
        pstar -= 1

    new_prefix = _raw_segment(prefix, cycle, zero(k), diag(k, pstar))
    new_cycle = _raw_segment(prefix, cycle, diag(k, pstar), diag(k, pstar + s0))
    return InfPath(new_prefix, new_cycle)


# -- public operations ----------------------------------------------------


def segment(x: InfPath, a: Degree, b: Degree) -> FinPath:
    """x(a, b): the degree b-a segment starting at position a."""
    if not leq(a, b):
        raise InfPathError(f"segment needs {a} <= {b}")
    return _raw_segment(x.prefix, x.cycle, a, b)


def vertex_at(x: InfPath, n: Degree) -> str:
    return segment(x, n, n).range


def shift(x: InfPath, m) -> InfPath:
    """sigma^m: delete the initial degree-m segment."""
    k = x.graph.rank
    if isinstance(m, int):
        m = diag(k, m)
    if all(c == 0 for c in m):
        return x
    P = join(m, x.prefix.degree)
    new_prefix = segment(x, m, P)
    new_cycle = segment(x, P, add(P, x.cycle.degree))
    return _canonical(new_prefix, new_cycle)


def prefix_path(lam: FinPath, x: InfPath) -> InfPath:
    """sigma_lam: prepend the finite path lam (requires s(lam) = r(x))."""
    if lam.graph is not x.graph:
        raise InfPathError("path and infinite path on different graphs")
    if lam.source != x.range:
        raise InfPathError(
            f"cannot prefix: source {lam.source} != range {x.range}"
        )
    return _canonical(compose(lam, x.prefix), x.cycle)


def inf_path_eq(x: InfPath, y: InfPath) -> bool:
    """Functor equality; canonical forms make this syntactic.

    A representation-level window comparison (common-multiple cycles) is
    used as a cross-check in the property suite; see tests.
    """
    if x.graph is not y.graph:
        raise InfPathError("infinite paths on different graphs")
    return x == y


def window_eq(x: InfPath, y: InfPath) -> bool:
    """Equality by direct segment comparison on a sound finite window.

    Both canonical cycles are balanced, so beyond the joined prefixes the
    two paths are s_x- and s_y-periodic along the diagonal; agreement out
    to lcm(s_x, s_y) more diagonal steps pins both tails.
    """
    import math

    if x.graph is not y.graph:
        raise InfPathError("infinite paths on different graphs")
    k = x.graph.rank
    sx, sy = x.cycle.degree[0], y.cycle.degree[0]
    P = join(x.prefix.degree, y.prefix.degree)
    W = add(P, diag(k, math.lcm(sx, sy)))
    return segment(x, zero(k), W) == segment(y, zero(k), W)


def in_cylinder(x: InfPath, lam: FinPath) -> bool:
    """x in Z(lam), i.e. x(0, d(lam)) = lam."""
    return segment(x, zero(x.graph.rank), lam.degree) == lam


def tail_set(x: InfPath) -> FrozenSet[InfPath]:
    """The finite set {sigma^n(x) : n in N^k} in canonical form."""
    k = x.graph.rank
    seen: Set[InfPath] = {x}
    frontier = [x]
    while frontier:
        y = frontier.pop()
        for i in range(1, k + 1):
            z = shift(y, basis(k, i))
            if z not in seen:
                seen.add(z)
                frontier.append(z)
        if len(seen) > _TAIL_CAP:
            raise InfPathError("tail set exceeded cap")
    return frozenset(seen)


def same_orbit(x: InfPath, y: InfPath) -> bool:
    """Whether some shifts of x and y agree."""
    return not tail_set(x).isdisjoint(tail_set(y))


def diagonal_trail(prefix: FinPath, cycle: FinPath) -> FrozenSet[str]:
    """All vertices x(m,...,m) of the path prefix.cycle^infinity.

    Runs the diagonal block orbit to its first repeat, so the result is
    complete for every m.  Because vertex-reach complements absorb along
    paths, avoiding a reach set on the diagonal trail is equivalent to
    avoiding it on the whole grid trail.
    """
    g = prefix.graph
    k = g.rank
    D, C = prefix.degree, cycle.degree
    dmax = max(D) if D else 0
    out = set()
    for m in range(dmax):
        out.add(_raw_segment(prefix, cycle, diag(k, m), diag(k, m)).range)
    one = ones(k)
    K = _raw_segment(prefix, cycle, diag(k, dmax), add(diag(k, dmax), C))
    seen = set()
    while K not in seen:
        seen.add(K)
        out.add(K.range)
        K = segment_of(compose(K, K), one, add(one, C))
    return frozenset(out)


# -- cofinality ------------------------------------------------------------


@dataclass
class CofinalityReport:
    verdict: bool
    witness: Optional[Tuple[str, InfPath]]
    truncated: bool = False

    def as_dict(self) -> dict:
        return {
            "cofinal": self.verdict,
            "witness": None
            if self.witness is None
            else {"vertex": self.witness[0], "path": render_inf_path(self.witness[1])},
            "truncated": self.truncated,
        }


def reach_set(g: KGraph, v: str) -> FrozenSet[str]:
    """Vertices w with vLambda.w nonempty (search range -> source)."""
    seen = {v}
    frontier = [v]
    while frontier:
        u = frontier.pop()
        for i in range(1, g.rank + 1):
            for e in g.edges_with_range(u, i):
                w = g.edge(e).source
                if w not in seen:
                    seen.add(w)
                    frontier.append(w)
    return frozenset(seen)


def _grid_vertices(p: FinPath) -> Set[str]:
    """All vertices p(n) for n <= d(p), by exhaustive factorization."""
    from .degrees import degrees_upto

    out = set()
    for n in degrees_upto(p.graph.rank, p.degree):
        out.add(segment_of(p, n, n).range)
    return out


def is_cofinal(g: KGraph) -> CofinalityReport:
    """Decide cofinality: every vertex must reach the orbit of every path.

    For each vertex v, let U be the complement of its reach set.  Because
    reach sets absorb along paths, an infinite path avoids Reach(v)
    exactly when its diagonal trail stays in the greatest fixpoint S* of

        F(S) = {w in S : some degree-(1,..,1) path from w has all its
                grid vertices inside S}.

    A nonempty S* yields a concrete eventually periodic witness by
    chaining diagonal blocks until a vertex repeats.
    """
    from .kgraph import structural_flags

    flags = structural_flags(g)
    if not flags.source_free:
        raise KGraphError("cofinality analysis requires a source-free graph")
    one = ones(g.rank)
    for v in g.vertices:
        U = set(g.vertices) - set(reach_set(g, v))
        S = set(U)
        changed = True
        while changed and S:
            changed = False
            for w in sorted(S):
                ok = False
                for lam in enumerate_paths(g, w, one):
                    if _grid_vertices(lam) <= S:
                        ok = True
                        break
                if not ok:
                    S.remove(w)
                    changed = True
        if S:
            witness = _witness_path_in(g, S)
            return CofinalityReport(False, (v, witness), truncated=g.truncated)
    return CofinalityReport(True, None, truncated=g.truncated)


def _witness_path_in(g: KGraph, S: Set[str]) -> InfPath:
    """Chain degree-(1,..,1) blocks inside S until a corner vertex repeats."""
    one = ones(g.rank)
    start = min(S)
    blocks: List[FinPath] = []
    corners = [start]
    at = start
    while True:
        lam = next(
            p for p in enumerate_paths(g, at, one) if _grid_vertices(p) <= S
        )
        blocks.append(lam)
        at = lam.source
        if at in corners:
            i = corners.index(at)
            prefix = vertex_path(g, start)
            for b in blocks[:i]:
                prefix = compose(prefix, b)
            cycle = blocks[i]
            for b in blocks[i + 1 :]:
                cycle = compose(cycle, b)
            return make_inf_path(prefix, cycle)
        corners.append(at)


# -- periodicity ------------------------------------------------------------


@dataclass
class PeriodicityReport:
    certified_pairs: List[Tuple[FinPath, FinPath, int]]
    per_group: List[Tuple[int, ...]]
    h_per: List[str]
    character_candidate: Optional[List] = None
    depth: int = 0
    truncated: bool = False

    def pair_degrees(self) -> List[Tuple[int, ...]]:
        return [
            tuple(a - b for a, b in zip(lam.degree, nu.degree))
            for lam, nu, _ in self.certified_pairs
        ]

    def as_dict(self) -> dict:
        return {
            "certified_pairs": [
                {"lam": render_path(l), "nu": render_path(n), "depth": d}
                for l, n, d in self.certified_pairs
            ],
            "per_group_basis": [list(b) for b in self.per_group],
            "h_per": self.h_per,
            "character_candidate": self.character_candidate,
            "depth": self.depth,
            "truncated": self.truncated,
        }


def _pair_agrees(g: KGraph, lam: FinPath, nu: FinPath, window: int) -> bool:
    """lam.gamma and nu.gamma agree on the common window for every
    continuation gamma of degree (window,...,window)."""
    k = g.rank
    W = add(meet(lam.degree, nu.degree), diag(k, window))
    for gamma in enumerate_paths(g, lam.source, diag(k, window)):
        a = segment_of(compose(lam, gamma), zero(k), W)
        b = segment_of(compose(nu, gamma), zero(k), W)
        if a != b:
            return False
    return True


def periodic_pairs(g: KGraph, depth: int = 4) -> PeriodicityReport:
    """Enumerate and certify periodic pairs up to a degree budget.

    A pair (lam, nu) with s(lam) = s(nu) is certified at depth N when all
    degree-(N,..,N) continuations agree on the common window and the
    agreement survives one extra step.  This is a bounded certificate,
    not a completeness claim.  For rank >= 2 the continuation window is
    capped at 2 to keep enumeration at desk scale.
    """
    from .kgraph import structural_flags

    flags = structural_flags(g)
    if not flags.source_free:
        raise KGraphError("periodicity analysis requires a source-free graph")
    from .degrees import degrees_with_total_upto

    window = depth if g.rank == 1 else min(depth, 2)
    all_paths: List[FinPath] = []
    for v in g.vertices:
        for deg in degrees_with_total_upto(g.rank, depth):
            all_paths.extend(enumerate_paths(g, v, deg))
    by_source: Dict[str, List[FinPath]] = {}
    for p in all_paths:
        by_source.setdefault(p.source, []).append(p)

    certified: List[Tuple[FinPath, FinPath, int]] = []
    for src, group in sorted(by_source.items()):
        group = sorted(group, key=lambda p: (total(p.degree), render_path(p)))
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                lam, nu = group[j], group[i]
                if total(lam.degree) + total(nu.degree) > depth:
                    continue
                if _pair_agrees(g, lam, nu, window) and _pair_agrees(
                    g, lam, nu, window + 1
                ):
                    certified.append((lam, nu, window))

    gens = [
        tuple(a - b for a, b in zip(lam.degree, nu.degree))
        for lam, nu, _ in certified
    ]
    basis_vecs = subgroup_basis(gens, g.rank)

    # Vertices realizing the whole group, with the quantifiers restricted
    # to the enumerated degree budget |d(lam)| + |m| <= depth.
    h_per: List[str] = []
    cert_set = {(l, n) for l, n, _ in certified} | {(n, l) for l, n, _ in certified}
    for v in g.vertices:
        ok = True
        for lam in all_paths:
            if lam.range != v:
                continue
            for m in degrees_with_total_upto(g.rank, depth - total(lam.degree)):
                delta = tuple(a - b for a, b in zip(lam.degree, m))
                if not in_subgroup(delta, basis_vecs):
                    continue
                if m == lam.degree:
                    continue  # mu = lam itself realizes the pair
                found = any(
                    (lam, mu) in cert_set
                    for mu in enumerate_paths(g, v, m)
                    if mu.source == lam.source
                )
                if not found:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            h_per.append(v)

    return PeriodicityReport(
        certified_pairs=certified,
        per_group=basis_vecs,
        h_per=h_per,
        depth=depth,
        truncated=g.truncated,
    )


# -- integer subgroup helpers ----------------------------------------------


def subgroup_basis(vectors: Sequence[Tuple[int, ...]], k: int) -> List[Tuple[int, ...]]:
    """Row-echelon basis of the subgroup of Z^k generated by the vectors.

    Standard gcd elimination column by column; pivots are positive and
    each pivot column is zero in all later rows.
    """
    mat = [list(v) for v in vectors if any(v)]
    out: List[List[int]] = []
    for col in range(k):
        while True:
            nz = [r for r in mat if r[col] != 0]
            if len(nz) <= 1:
                break
            nz.sort(key=lambda r: abs(r[col]))
            p = nz[0]
            for r in nz[1:]:
                q = r[col] // p[col]
                for t in range(k):
                    r[t] -= q * p[t]
            mat = [r for r in mat if any(r)]
        nz = [r for r in mat if r[col] != 0]
        if nz:
            p = nz[0]
            if p[col] < 0:
                p[:] = [-x for x in p]
            out.append(p)
            mat = [r for r in mat if r is not p]
    return [tuple(r) for r in out]


def in_subgroup(vec: Tuple[int, ...], basis_vecs: Sequence[Tuple[int, ...]]) -> bool:
    """Membership of vec in the span of an echelon basis over Z."""
    v = list(vec)
    for b in basis_vecs:
        col = next((i for i, x in enumerate(b) if x != 0), None)
        if col is None:
            continue
        if v[col] % b[col] == 0:
            q = v[col] // b[col]
            for t in range(len(v)):
                v[t] -= q * b[t]
    return not any(v)
