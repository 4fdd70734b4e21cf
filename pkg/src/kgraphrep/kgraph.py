"""Finite k-colored graphs with commuting-square data.

A :class:`KGraph` stores the skeleton presentation of a rank-k graph:
vertices, colored edges with range/source maps, and for each pair of
colors i < j a square table identifying every color-i-then-j composable
edge pair with a unique color-j-then-i pair.  The square table is the
local datum from which unique path factorization is derived; it must be
a bijection between the two kinds of composable pairs, and for rank 3
and above the pairwise swaps must satisfy the hexagon condition.  Both
are checked by :func:`validate_factorization`.

Graphs are immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .degrees import Degree, basis


class KGraphError(ValueError):
    """Structural problem in a k-graph presentation."""


class KGParseError(KGraphError):
    """Malformed .kg text; carries 1-based line and column."""

    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Edge:
    name: str
    color: int  # 1-based
    range: str
    source: str


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Vertex-indexed edge counts for one color: entries[v][w] = #(v <- w)."""

    color: int
    vertices: Tuple[str, ...]
    entries: Tuple[Tuple[int, ...], ...]

    def row_sums(self) -> Tuple[int, ...]:
        return tuple(sum(row) for row in self.entries)


class KGraph:
    """Immutable k-graph presentation.

    `squares` maps a composable pair (e, f) with color(e) < color(f) and
    s(e) = r(f) to the pair (fhat, ehat) of the opposite color order
    representing the same degree-(e_i + e_j) path:  e f = fhat ehat.
    """

    def __init__(
        self,
        rank: int,
        vertices: Sequence[str],
        edges: Sequence[Edge],
        squares: Dict[Tuple[str, str], Tuple[str, str]],
        truncated: bool = False,
        interior_vertices: Optional[FrozenSet[str]] = None,
        name: str = "",
    ):
        if rank < 1:
            raise KGraphError("rank must be a positive integer")
        self.rank = rank
        self.vertices: Tuple[str, ...] = tuple(vertices)
        self.edges: Dict[str, Edge] = {e.name: e for e in edges}
        self.squares: Dict[Tuple[str, str], Tuple[str, str]] = dict(squares)
        self.truncated = truncated
        self.interior_vertices = interior_vertices
        self.name = name

        self._vertex_set = frozenset(self.vertices)
        if len(self._vertex_set) != len(self.vertices):
            raise KGraphError("duplicate vertex name")
        if len(self.edges) != len(edges):
            raise KGraphError("duplicate edge name")
        clash = self._vertex_set & set(self.edges)
        if clash:
            raise KGraphError(f"names used for both vertex and edge: {sorted(clash)}")

        for e in edges:
            if not (1 <= e.color <= rank):
                raise KGraphError(f"edge {e.name}: color {e.color} out of range 1..{rank}")
            if e.range not in self._vertex_set:
                raise KGraphError(f"edge {e.name}: unknown range vertex {e.range!r}")
            if e.source not in self._vertex_set:
                raise KGraphError(f"edge {e.name}: unknown source vertex {e.source!r}")

        # Lookup tables; sorted for deterministic enumeration order.
        self.edges_by_color: Dict[int, Tuple[str, ...]] = {
            i: tuple(sorted(n for n, e in self.edges.items() if e.color == i))
            for i in range(1, rank + 1)
        }
        self._out: Dict[Tuple[int, str], Tuple[str, ...]] = {}
        self._into: Dict[Tuple[int, str], Tuple[str, ...]] = {}
        for i in range(1, rank + 1):
            for v in self.vertices:
                self._out[(i, v)] = tuple(
                    n for n in self.edges_by_color[i] if self.edges[n].range == v
                )
                self._into[(i, v)] = tuple(
                    n for n in self.edges_by_color[i] if self.edges[n].source == v
                )

        # Inverse square table (color-j-then-i pair -> color-i-then-j pair).
        self.squares_inv: Dict[Tuple[str, str], Tuple[str, str]] = {}
        for (e, f), (fhat, ehat) in self.squares.items():
            self.squares_inv[(fhat, ehat)] = (e, f)

    # -- basic accessors -------------------------------------------------

    def edge(self, name: str) -> Edge:
        try:
            return self.edges[name]
        except KeyError:
            raise KGraphError(f"unknown edge {name!r}") from None

    def color_of(self, name: str) -> int:
        return self.edge(name).color

    def edges_with_range(self, v: str, color: int) -> Tuple[str, ...]:
        """vLambda^{e_color}: edges whose range is v."""
        return self._out[(color, v)]

    def edges_with_source(self, v: str, color: int) -> Tuple[str, ...]:
        """Lambda^{e_color}v: edges whose source is v."""
        return self._into[(color, v)]

    def vertex_index(self, v: str) -> int:
        return self.vertices.index(v)

    def is_interior_vertex(self, v: str) -> bool:
        return self.interior_vertices is None or v in self.interior_vertices

    def __repr__(self) -> str:
        return (
            f"KGraph(rank={self.rank}, vertices={len(self.vertices)}, "
            f"edges={len(self.edges)}{', truncated' if self.truncated else ''})"
        )


def adjacency_matrix(g: KGraph, color: int) -> AdjacencyMatrix:
    """Entries count color-`color` edges by (range, source) pair."""
    if not (1 <= color <= g.rank):
        raise KGraphError(f"color {color} out of range 1..{g.rank}")
    idx = {v: i for i, v in enumerate(g.vertices)}
    n = len(g.vertices)
    rows = [[0] * n for _ in range(n)]
    for e in g.edges.values():
        if e.color == color:
            rows[idx[e.range]][idx[e.source]] += 1
    return AdjacencyMatrix(color, g.vertices, tuple(tuple(r) for r in rows))


def structural_problems(g: KGraph) -> List[str]:
    """Square-table completeness and bijectivity defects, with witnesses.

    Endpoint sanity of each entry is checked as well.  An empty list
    means the presentation is structurally valid (factorization up to a
    depth still needs :func:`validate_factorization`).
    """
    problems: List[str] = []
    for (en, fn), (fhn, ehn) in g.squares.items():
        for nm in (en, fn, fhn, ehn):
            if nm not in g.edges:
                problems.append(f"square ({en},{fn}): unknown edge {nm!r}")
                break
        else:
            e, f, fh, eh = g.edge(en), g.edge(fn), g.edge(fhn), g.edge(ehn)
            if not e.color < f.color:
                problems.append(f"square ({en},{fn}): colors not ascending")
                continue
            if (fh.color, eh.color) != (f.color, e.color):
                problems.append(f"square ({en},{fn}): image colors mismatch")
                continue
            if e.source != f.range:
                problems.append(f"square ({en},{fn}): pair not composable")
            if fh.range != e.range:
                problems.append(f"square ({en},{fn}) = ({fhn},{ehn}): range broken")
            if eh.source != f.source:
                problems.append(f"square ({en},{fn}) = ({fhn},{ehn}): source broken")
            if fh.source != eh.range:
                problems.append(f"square ({en},{fn}) = ({fhn},{ehn}): image not composable")

    # Completeness: every composable i<j pair has exactly one entry.
    for i in range(1, g.rank + 1):
        for j in range(i + 1, g.rank + 1):
            for en in g.edges_by_color[i]:
                e = g.edge(en)
                for fn in g.edges_with_range(e.source, j):
                    if (en, fn) not in g.squares:
                        problems.append(f"missing square for composable pair ({en},{fn})")

    # Bijectivity: images must exhaust the j-then-i composable pairs once each.
    seen: Dict[Tuple[str, str], Tuple[str, str]] = {}
    for pair, image in g.squares.items():
        if image in seen:
            problems.append(
                f"square table not injective: ({pair[0]},{pair[1]}) and "
                f"({seen[image][0]},{seen[image][1]}) both map to ({image[0]},{image[1]})"
            )
        seen[image] = pair
    for i in range(1, g.rank + 1):
        for j in range(i + 1, g.rank + 1):
            for fn in g.edges_by_color[j]:
                f = g.edge(fn)
                for en in g.edges_with_range(f.source, i):
                    if (fn, en) not in seen:
                        problems.append(
                            f"square table not surjective: ({fn},{en}) is not the image "
                            f"of any color-{i}-then-{j} pair"
                        )
    return problems


# -- .kg textual format -------------------------------------------------


def load_kgraph(text: str, name: str = "") -> KGraph:
    """Parse the line-oriented .kg format and structurally validate.

    Format (UTF-8, '#' comments)::

        kgraph <k>
        vertex <name>
        edge <color> <name> <range> <source>
        square <e> <f> = <fhat> <ehat>
    """
    rank: Optional[int] = None
    vertices: List[str] = []
    edges: List[Edge] = []
    squares: Dict[Tuple[str, str], Tuple[str, str]] = {}

    def err(msg: str, lineno: int, col: int = 1) -> KGParseError:
        return KGParseError(msg, lineno, col)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        tokens = line.split()
        col = raw.index(tokens[0]) + 1
        kind = tokens[0]
        if kind == "kgraph":
            if rank is not None:
                raise err("duplicate kgraph header", lineno, col)
            if len(tokens) != 2 or not tokens[1].isdigit() or int(tokens[1]) < 1:
                raise err("expected `kgraph <positive rank>`", lineno, col)
            rank = int(tokens[1])
        elif kind == "vertex":
            if rank is None:
                raise err("vertex before kgraph header", lineno, col)
            if len(tokens) != 2:
                raise err("expected `vertex <name>`", lineno, col)
            vertices.append(tokens[1])
        elif kind == "edge":
            if rank is None:
                raise err("edge before kgraph header", lineno, col)
            if len(tokens) != 5:
                raise err("expected `edge <color> <name> <range> <source>`", lineno, col)
            if not tokens[1].isdigit():
                raise err(f"edge color {tokens[1]!r} is not an integer", lineno, col)
            edges.append(Edge(tokens[2], int(tokens[1]), tokens[3], tokens[4]))
        elif kind == "square":
            if rank is None:
                raise err("square before kgraph header", lineno, col)
            if len(tokens) != 6 or tokens[3] != "=":
                raise err("expected `square <e> <f> = <fhat> <ehat>`", lineno, col)
            key = (tokens[1], tokens[2])
            if key in squares:
                raise err(f"duplicate square for pair ({key[0]},{key[1]})", lineno, col)
            squares[key] = (tokens[4], tokens[5])
        else:
            raise err(f"unknown directive {kind!r}", lineno, col)

    if rank is None:
        raise KGParseError("missing kgraph header", 1)
    try:
        g = KGraph(rank, vertices, edges, squares, name=name)
    except KGraphError as exc:
        raise KGraphError(f"invalid k-graph: {exc}") from exc
    problems = structural_problems(g)
    if problems:
        raise KGraphError("invalid k-graph: " + "; ".join(problems[:5]))
    return g


def serialize_kgraph(g: KGraph) -> str:
    """Canonical .kg text: vertices, then edges by (color, name), then squares."""
    lines = [f"kgraph {g.rank}"]
    for v in g.vertices:
        lines.append(f"vertex {v}")
    for color in range(1, g.rank + 1):
        for name in g.edges_by_color[color]:
            e = g.edge(name)
            lines.append(f"edge {color} {name} {e.range} {e.source}")
    for (en, fn) in sorted(g.squares):
        fh, eh = g.squares[(en, fn)]
        lines.append(f"square {en} {fn} = {fh} {eh}")
    return "\n".join(lines) + "\n"


# -- structural flags ----------------------------------------------------


@dataclass
class StructuralFlags:
    row_finite: bool
    source_free: bool
    sink_free: bool
    witnesses: Dict[str, List[Tuple[str, int]]] = field(default_factory=dict)
    truncated: bool = False

    def as_dict(self) -> dict:
        return {
            "row_finite": self.row_finite,
            "source_free": self.source_free,
            "sink_free": self.sink_free,
            "witnesses": {k: [list(t) for t in v] for k, v in self.witnesses.items()},
            "truncated": self.truncated,
        }


def structural_flags(g: KGraph) -> StructuralFlags:
    """Per-color source/sink flags.  Explicit finite edge lists are always
    row-finite; the field is kept for report stability."""
    witnesses: Dict[str, List[Tuple[str, int]]] = {"source_free": [], "sink_free": []}
    for v in g.vertices:
        for i in range(1, g.rank + 1):
            if not g.edges_with_range(v, i):
                witnesses["source_free"].append((v, i))
            if not g.edges_with_source(v, i):
                witnesses["sink_free"].append((v, i))
    return StructuralFlags(
        row_finite=True,
        source_free=not witnesses["source_free"],
        sink_free=not witnesses["sink_free"],
        witnesses={k: v for k, v in witnesses.items() if v},
        truncated=g.truncated,
    )


# -- factorization validation -------------------------------------------


@dataclass
class ValidationReport:
    passed: bool
    depth: int
    problems: List[str]
    checked_paths: int
    truncated: bool = False

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "depth": self.depth,
            "problems": self.problems,
            "checked_paths": self.checked_paths,
            "truncated": self.truncated,
        }


def validate_factorization(g: KGraph, depth: int = 2) -> ValidationReport:
    """Certify unique factorization for all paths of coordinate-sum <= depth+1.

    Checks, in order: square-table structure and bijectivity, the hexagon
    condition for rank >= 3 (two swap routes from descending to ascending
    color order agree), and exhaustive uniqueness of every degree split of
    every enumerable path.  Failures carry witnesses; nothing raises.
    """
    from . import paths as _paths  # local import; paths depends on kgraph

    if depth < 1 or depth > 3:
        raise KGraphError("depth must be in 1..3")
    problems = list(structural_problems(g))
    checked = 0

    if not problems and g.rank >= 3:
        for i in range(1, g.rank + 1):
            for j in range(i + 1, g.rank + 1):
                for l in range(j + 1, g.rank + 1):
                    for en in g.edges_by_color[l]:
                        e = g.edge(en)
                        for fn in g.edges_with_range(e.source, j):
                            f = g.edge(fn)
                            for gn in g.edges_with_range(f.source, i):
                                checked += 1
                                word = [en, fn, gn]  # descending colors l > j > i
                                a = _paths._swap_route(g, word, (1, 0, 1))
                                b = _paths._swap_route(g, word, (0, 1, 0))
                                if a != b:
                                    problems.append(
                                        "hexagon failure on word "
                                        f"{en}.{fn}.{gn}: routes give {a} vs {b}"
                                    )

    if not problems:
        from .degrees import degrees_with_total_upto

        for v in g.vertices:
            for deg in degrees_with_total_upto(g.rank, depth + 1):
                if sum(deg) == 0:
                    continue
                for lam in _paths.enumerate_paths(g, v, deg):
                    checked += 1
                    for m in _split_degrees(deg):
                        hits = []
                        for mu in _paths.enumerate_paths(g, v, m):
                            for nu in _paths.enumerate_paths(
                                g, mu.source, tuple(a - b for a, b in zip(deg, m))
                            ):
                                if _paths.compose(mu, nu) == lam:
                                    hits.append((mu, nu))
                        if len(hits) != 1:
                            reprs = [
                                f"({_paths.render_path(a)}, {_paths.render_path(b)})"
                                for a, b in hits[:2]
                            ]
                            problems.append(
                                f"path {_paths.render_path(lam)} split {m}: "
                                f"{len(hits)} factorizations {reprs}"
                            )
    return ValidationReport(
        passed=not problems,
        depth=depth,
        problems=problems,
        checked_paths=checked,
        truncated=g.truncated,
    )


def _split_degrees(deg: Degree):
    from itertools import product as _product

    return _product(*(range(d + 1) for d in deg))


def commuting_adjacency_problems(g: KGraph) -> List[str]:
    """Exact integer check that all adjacency matrices commute pairwise."""
    problems = []
    mats = {i: adjacency_matrix(g, i).entries for i in range(1, g.rank + 1)}
    n = len(g.vertices)
    for i in range(1, g.rank + 1):
        for j in range(i + 1, g.rank + 1):
            A, B = mats[i], mats[j]
            for r in range(n):
                for c in range(n):
                    ab = sum(A[r][t] * B[t][c] for t in range(n))
                    ba = sum(B[r][t] * A[t][c] for t in range(n))
                    if ab != ba:
                        problems.append(
                            f"A_{i}A_{j} != A_{j}A_{i} at "
                            f"({g.vertices[r]},{g.vertices[c]}): {ab} vs {ba}"
                        )
    return problems
