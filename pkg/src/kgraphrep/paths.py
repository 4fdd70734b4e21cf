"""Finite-path calculus: composition, factorization, enumeration, cylinders.

A finite path is kept in *color-normal form*: all color-1 edges first,
then color-2, and so on, each color segment a composable chain.  Normal
forms are unique representatives of morphisms once the square table
presents a genuine rank-k graph, so path equality is syntactic.

Cylinder sets Z(p) are manipulated through :class:`CylUnion`, a pairwise
disjoint finite list of cylinders closed under intersection, subtraction
and union via minimal common extensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Dict, Iterable, List, Sequence, Set, Tuple

from .degrees import Degree, add, join, leq, sub, zero
from .kgraph import KGraph, KGraphError


class PathError(KGraphError):
    """Ill-formed path or illegal path operation."""


@dataclass(frozen=True)
class FinPath:
    """A morphism in color-normal form.

    `v` is the range vertex; `segments[i]` lists the color-(i+1) edges in
    composition order.  Degree-0 paths are vertices (all segments empty).
    """

    graph: KGraph
    v: str
    segments: Tuple[Tuple[str, ...], ...]

    @cached_property
    def degree(self) -> Degree:
        return tuple(len(s) for s in self.segments)

    @cached_property
    def source(self) -> str:
        last = self.v
        for seg in self.segments:
            if seg:
                last = self.graph.edge(seg[-1]).source
        return last

    @property
    def range(self) -> str:
        return self.v

    def is_vertex(self) -> bool:
        return all(not s for s in self.segments)

    def chain(self) -> List[str]:
        """Flat edge list in normal-form order."""
        return [e for seg in self.segments for e in seg]

    def __repr__(self) -> str:
        return f"FinPath({render_path(self)})"


def vertex_path(g: KGraph, v: str) -> FinPath:
    if v not in g._vertex_set:
        raise PathError(f"unknown vertex {v!r}")
    return FinPath(g, v, tuple(() for _ in range(g.rank)))


def edge_path(g: KGraph, name: str) -> FinPath:
    e = g.edge(name)
    segs = [()] * g.rank
    segs[e.color - 1] = (name,)
    return FinPath(g, e.range, tuple(segs))


def path_from_chain(g: KGraph, v: str, chain: Sequence[str]) -> FinPath:
    """Build a path from a composable edge word, normalizing colors."""
    word = list(chain)
    _check_chain(g, v, word)
    _sort_to_normal(g, word)
    segs: List[List[str]] = [[] for _ in range(g.rank)]
    for name in word:
        segs[g.color_of(name) - 1].append(name)
    return FinPath(g, v, tuple(tuple(s) for s in segs))


def _check_chain(g: KGraph, v: str, word: Sequence[str]) -> None:
    at = v
    for name in word:
        e = g.edge(name)
        if e.range != at:
            raise PathError(f"edge {name} has range {e.range}, expected {at}")
        at = e.source


def _sort_to_normal(g: KGraph, word: List[str]) -> None:
    """Insertion sort by color using inverse squares for each adjacent swap."""
    for i in range(1, len(word)):
        j = i
        while j > 0 and g.color_of(word[j]) < g.color_of(word[j - 1]):
            key = (word[j - 1], word[j])
            try:
                e, f = g.squares_inv[key]
            except KeyError:
                raise PathError(
                    f"no square with image ({key[0]},{key[1]}); table incomplete"
                ) from None
            word[j - 1], word[j] = e, f
            j -= 1


def _swap_route(g: KGraph, word: Sequence[str], positions: Sequence[int]) -> Tuple[str, ...]:
    """Apply inverse-square swaps at the given adjacent positions in order.

    Used by the hexagon check: each position p swaps word[p], word[p+1],
    which must be in descending color order.
    """
    w = list(word)
    for p in positions:
        hi, lo = w[p], w[p + 1]
        if g.color_of(hi) <= g.color_of(lo):
            raise PathError("swap route applied to non-descending pair")
        e, f = g.squares_inv[(hi, lo)]
        w[p], w[p + 1] = e, f
    return tuple(w)


from functools import lru_cache


@lru_cache(maxsize=1 << 18)
def _compose_cached(a: FinPath, b: FinPath) -> FinPath:
    return path_from_chain(a.graph, a.v, a.chain() + b.chain())


def compose(a: FinPath, b: FinPath) -> FinPath:
    if a.graph is not b.graph:
        raise PathError("paths live on different graphs")
    if a.source != b.range:
        raise PathError(
            f"cannot compose: source {a.source} of {render_path(a)} != "
            f"range {b.range} of {render_path(b)}"
        )
    if a.is_vertex():
        return b
    if b.is_vertex():
        return a
    return _compose_cached(a, b)


@lru_cache(maxsize=1 << 18)
def factorize(p: FinPath, m: Degree) -> Tuple[FinPath, FinPath]:
    """The unique (mu, nu) with p = mu nu and d(mu) = m.

    Works by peeling one front edge per requested color coordinate,
    bubbling it forward through lower-color edges with square rewrites.
    Uniqueness (rewrite-order independence) is certified separately by
    `validate_factorization`.
    """
    g = p.graph
    if len(m) != g.rank:
        raise PathError(f"degree {m} has wrong rank")
    if not leq(m, p.degree):
        raise PathError(f"split {m} exceeds degree {p.degree}")
    word = [(g.color_of(e), e) for e in p.chain()]
    peeled: List[str] = []
    for color in range(1, g.rank + 1):
        for _ in range(m[color - 1]):
            idx = next(i for i, (c, _) in enumerate(word) if c == color)
            while idx > 0:
                lo_c, lo = word[idx - 1]
                _, hi = word[idx]
                fhat, ehat = g.squares[(lo, hi)]
                word[idx - 1] = (color, fhat)
                word[idx] = (lo_c, ehat)
                idx -= 1
            peeled.append(word.pop(0)[1])
    mu = path_from_chain(g, p.v, peeled)
    nu = path_from_chain(g, mu.source, [e for _, e in word])
    return mu, nu


def segment_of(p: FinPath, a: Degree, b: Degree) -> FinPath:
    """p(a, b) for a <= b <= d(p)."""
    if not leq(a, b):
        raise PathError(f"segment needs {a} <= {b}")
    head, rest = factorize(p, a)
    mid, _ = factorize(rest, sub(b, a))
    return mid


def enumerate_paths(g: KGraph, v: str, n: Degree) -> List[FinPath]:
    """vLambda^n in canonical (per-color lexicographic) order."""
    if len(n) != g.rank:
        raise PathError(f"degree {n} has wrong rank")
    if v not in g._vertex_set:
        raise PathError(f"unknown vertex {v!r}")
    results: List[FinPath] = []

    def color_chains(color: int, start: str, length: int) -> Iterable[Tuple[Tuple[str, ...], str]]:
        if length == 0:
            yield (), start
            return
        for e in g.edges_with_range(start, color):
            for tail, end in color_chains(color, g.edge(e).source, length - 1):
                yield (e,) + tail, end

    def go(color: int, at: str, acc: List[Tuple[str, ...]]) -> None:
        if color > g.rank:
            results.append(FinPath(g, v, tuple(acc)))
            return
        for seg, end in color_chains(color, at, n[color - 1]):
            go(color + 1, end, acc + [seg])

    go(1, v, [])
    return results


def lambda_min(lam: FinPath, eta: FinPath) -> Set[Tuple[FinPath, FinPath]]:
    """All (alpha, beta) with lam.alpha = eta.beta at degree d(lam) v d(eta)."""
    if lam.graph is not eta.graph:
        raise PathError("paths live on different graphs")
    if lam.range != eta.range:
        return set()
    D = join(lam.degree, eta.degree)
    out = set()
    for alpha in enumerate_paths(lam.graph, lam.source, sub(D, lam.degree)):
        xi = compose(lam, alpha)
        head, beta = factorize(xi, eta.degree)
        if head == eta:
            out.add((alpha, beta))
    return out


def mce(lam: FinPath, eta: FinPath) -> Set[FinPath]:
    """Minimal common extensions: the paths lam.alpha = eta.beta."""
    return {compose(lam, alpha) for alpha, _ in lambda_min(lam, eta)}


def extends(p: FinPath, q: FinPath) -> bool:
    """True iff Z(p) is contained in Z(q), i.e. p extends q."""
    return leq(q.degree, p.degree) and factorize(p, q.degree)[0] == q


# -- cylinder algebra ----------------------------------------------------


@dataclass(frozen=True)
class CylUnion:
    """A finite disjoint union of cylinders, kept normalized.

    Invariants: parts are pairwise disjoint (empty pairwise MCE) and no
    part extends another.  Construct through the module functions; the
    raw constructor trusts its input.
    """

    graph: KGraph
    parts: Tuple[FinPath, ...]

    def is_empty(self) -> bool:
        return not self.parts

    def __iter__(self):
        return iter(self.parts)

    def __repr__(self) -> str:
        return f"CylUnion({render_cyl(self)})"


def cyl_empty(g: KGraph) -> CylUnion:
    return CylUnion(g, ())


def cyl_of(g: KGraph, paths: Iterable[FinPath]) -> CylUnion:
    """Normalize an arbitrary cylinder list into a disjoint union."""
    out = cyl_empty(g)
    for p in paths:
        out = cyl_union(out, CylUnion(g, (p,)))
    return out


def _subtract_single(p: FinPath, q: FinPath) -> List[FinPath]:
    """Z(p) minus Z(q) as disjoint cylinders."""
    common = mce(p, q)
    if not common:
        return [p]
    if extends(p, q):
        return []
    D = join(p.degree, q.degree)
    out = []
    for alpha in enumerate_paths(p.graph, p.source, sub(D, p.degree)):
        xi = compose(p, alpha)
        if xi not in common:
            out.append(xi)
    return out


def cyl_intersect(a: CylUnion, b: CylUnion) -> CylUnion:
    if a.graph is not b.graph:
        raise PathError("cylinder unions on different graphs")
    parts: List[FinPath] = []
    for p in a.parts:
        for q in b.parts:
            parts.extend(sorted(mce(p, q), key=render_path))
    return CylUnion(a.graph, tuple(parts))


def cyl_subtract(a: CylUnion, b: CylUnion) -> CylUnion:
    if a.graph is not b.graph:
        raise PathError("cylinder unions on different graphs")
    parts: List[FinPath] = []
    for p in a.parts:
        pieces = [p]
        for q in b.parts:
            pieces = [r for piece in pieces for r in _subtract_single(piece, q)]
        parts.extend(pieces)
    return CylUnion(a.graph, tuple(parts))


def cyl_union(a: CylUnion, b: CylUnion) -> CylUnion:
    if a.graph is not b.graph:
        raise PathError("cylinder unions on different graphs")
    extra = cyl_subtract(b, a)
    return CylUnion(a.graph, a.parts + extra.parts)


def cyl_is_partition(g: KGraph, lam: FinPath, parts: Sequence[FinPath]) -> bool:
    """True iff the given cylinders partition Z(lam)."""
    for i, p in enumerate(parts):
        for q in parts[i + 1 :]:
            if p == q or mce(p, q):
                return False
    whole = CylUnion(g, (lam,))
    listed = cyl_of(g, parts)
    return cyl_subtract(whole, listed).is_empty() and cyl_subtract(listed, whole).is_empty()


# -- rendering and parsing ------------------------------------------------


def render_path(p: FinPath) -> str:
    if p.is_vertex():
        return p.v
    return "|".join(".".join(seg) for seg in p.segments)


def render_cyl(c: CylUnion) -> str:
    if c.is_empty():
        return "0"
    return "+".join(f"Z({render_path(p)})" for p in c.parts)


def parse_path(g: KGraph, text: str) -> FinPath:
    """Parse `v` or `e1.e2|f1` (color segments by '|', edges by '.')."""
    text = text.strip()
    if text in g._vertex_set:
        return vertex_path(g, text)
    segs = text.split("|")
    if len(segs) == 1 and g.rank > 1:
        segs = segs + [""] * (g.rank - 1)
    if len(segs) != g.rank:
        raise PathError(f"path {text!r}: expected {g.rank} color segments")
    chain: List[str] = []
    for i, seg in enumerate(segs, start=1):
        for name in filter(None, seg.split(".")):
            if name not in g.edges:
                raise PathError(f"path {text!r}: unknown edge {name!r}")
            if g.color_of(name) != i:
                raise PathError(f"path {text!r}: edge {name} is not color {i}")
            chain.append(name)
    if not chain:
        raise PathError(f"path {text!r}: empty and not a vertex name")
    v = g.edge(chain[0]).range
    _check_chain(g, v, chain)
    segs_t = tuple(
        tuple(filter(None, seg.split("."))) for seg in segs
    )
    return FinPath(g, v, segs_t)
