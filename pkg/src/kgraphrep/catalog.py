"""Built-in example systems with machine-readable expected findings.

Each entry packages a graph, optionally a measure or an abstract system,
and the findings the acceptance suite asserts.  Countable examples ship
as finite truncations: chains are closed with a loop at the cut so the
coding maps stay total (the closure atoms stand in for the deep tail),
and every report downstream carries the truncation marker.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .kgraph import Edge, KGraph, load_kgraph
from .measures import AtomicMeasure, CylMeasure, GeometricFamily, atomic_measure, eigen_measure
from .infpaths import InfPath, make_inf_path
from .paths import FinPath, compose, edge_path, vertex_path
from .sbfs import SBFS, abstract_sbfs, standard_sbfs


@dataclass
class CatalogEntry:
    name: str
    description: str
    graph: KGraph
    atomic: Optional[AtomicMeasure] = None
    eigen: Optional[CylMeasure] = None
    system: Optional[SBFS] = None
    restrict_atoms: Optional[Callable[[SBFS], set]] = None
    expected: Dict[str, object] = field(default_factory=dict)

    def build_system(self) -> SBFS:
        if self.system is not None:
            return self.system
        if self.atomic is None:
            raise ValueError(f"entry {self.name} has no atomic carrier")
        return standard_sbfs(self.graph, self.atomic, label=self.name)


BRIDGED_LOOPS_KG = """\
kgraph 1
vertex v1
vertex v2
edge 1 e v1 v1
edge 1 g v1 v2
edge 1 f v2 v2
"""

LOOP_FAN_KG = """\
kgraph 1
vertex v
vertex w
vertex u
edge 1 e v v
edge 1 g v w
edge 1 h v u
edge 1 f w w
edge 1 k u u
"""

SWAP_LOOP_KG = """\
kgraph 1
vertex v
edge 1 e v v
"""

FREE_RANK2_KG = """\
kgraph 2
vertex v
edge 1 a v v
edge 2 b v v
square a b = b a
"""


def forced_squares(vertices: Sequence[str], edges: Sequence[Edge]) -> Dict[Tuple[str, str], Tuple[str, str]]:
    """Square table when every two-color corner pair has a unique filler.

    Applicable when the product adjacency counts are all at most one per
    (range, source); raises otherwise.
    """
    by_name = {e.name: e for e in edges}
    squares: Dict[Tuple[str, str], Tuple[str, str]] = {}
    colors = sorted({e.color for e in edges})
    for i in colors:
        for j in colors:
            if not i < j:
                continue
            ei = [e for e in edges if e.color == i]
            ej = [e for e in edges if e.color == j]
            for e in ei:
                for f in ej:
                    if e.source != f.range:
                        continue
                    cands = [
                        (fh, eh)
                        for fh in ej
                        for eh in ei
                        if fh.range == e.range
                        and fh.source == eh.range
                        and eh.source == f.source
                    ]
                    if len(cands) != 1:
                        raise ValueError(
                            f"square for ({e.name},{f.name}) not forced: "
                            f"{len(cands)} candidates"
                        )
                    squares[(e.name, f.name)] = (cands[0][0].name, cands[0][1].name)
    return squares


def build_bridged_loops(truncation: int = 16) -> CatalogEntry:
    """Two loops joined by a bridge, carrying the atomic measure whose
    isolated atom at the pure left-loop path blocks joint ergodicity."""
    g = load_kgraph(BRIDGED_LOOPS_KG, name="bridged-loops")
    e, br, f = edge_path(g, "e"), edge_path(g, "g"), edge_path(g, "f")
    einf = make_inf_path(vertex_path(g, "v1"), e)
    finf = make_inf_path(vertex_path(g, "v2"), f)
    fam = GeometricFamily(
        unit=e, rest=br, cycle=f, ratio=Fraction(1, 2), first=Fraction(1, 4),
        count=truncation,
    )
    mu = atomic_measure(
        g, [(einf, Fraction(1, 4)), (finf, Fraction(1, 4))], [fam], truncation
    )
    return CatalogEntry(
        name="bridged-loops",
        description="two loops with a bridge; isolated atom makes the full "
        "representation reducible while the system stays monic",
        graph=g,
        atomic=mu,
        expected={
            "cofinal": False,
            "cofinal_witness_vertex": "v2",
            "cofinal_witness_path": "v1 * e",
            "irreducible": "reducible",
            "components": 2,
            "monic": "monic",
            "commutant_dim": 2,
            "per_group": [[1]],
            "h_per": ["v2"],
            "mass_Zf": Fraction(1, 4),
        },
    )


def build_swap_loop() -> CatalogEntry:
    """One loop acting on two points by the swap; ergodic coding maps but
    a reducible, non-monic representation."""
    g = load_kgraph(SWAP_LOOP_KG, name="swap-loop")
    sys = abstract_sbfs(
        g,
        ["0", "1"],
        {"0": Fraction(1), "1": Fraction(1)},
        {"e": {"0": "1", "1": "0"}},
        {"v": {"0", "1"}},
        label="swap-loop",
    )
    return CatalogEntry(
        name="swap-loop",
        description="two-point swap system over a single loop",
        graph=g,
        system=sys,
        expected={
            "cofinal": True,
            "irreducible": "reducible",
            "monic": "not monic",
            "monic_screen": "v",
            "commutant_dim": 2,
            "jointly_ergodic": True,
            "phi_fiber_dim": 2,
        },
    )


def build_loop_fan(truncation: int = 16) -> CatalogEntry:
    """Three loops with two bridges into the first; not cofinal, yet the
    bridge-orbit restriction is irreducible."""
    g = load_kgraph(LOOP_FAN_KG, name="loop-fan")
    e, f, k = edge_path(g, "e"), edge_path(g, "f"), edge_path(g, "k")
    br_g, br_h = edge_path(g, "g"), edge_path(g, "h")
    finf = make_inf_path(vertex_path(g, "w"), f)
    kinf = make_inf_path(vertex_path(g, "u"), k)
    fams = [
        GeometricFamily(e, br_g, f, Fraction(1, 2), Fraction(1, 8), truncation),
        GeometricFamily(e, br_h, k, Fraction(1, 2), Fraction(1, 8), truncation),
    ]
    mu = atomic_measure(
        g, [(finf, Fraction(1, 4)), (kinf, Fraction(1, 4))], fams, truncation
    )

    def restrict(sys: SBFS) -> set:
        keep = set()
        for a in sys.positive_atoms():
            if a.cycle == f or (a.prefix.is_vertex() and a.range == "w"):
                keep.add(a)
        return keep

    return CatalogEntry(
        name="loop-fan",
        description="non-cofinal fan of loops whose bridge-orbit restriction "
        "is irreducible",
        graph=g,
        atomic=mu,
        restrict_atoms=restrict,
        expected={
            "cofinal": False,
            "cofinal_witness_vertex": "w",
            "cofinal_witness_path": "u * k",
            "irreducible": "reducible",
            "components": 2,
            "restricted_irreducible": "irreducible",
            "restricted_commutant_dim": 1,
        },
    )


def twin_chains_kg(depth: int) -> str:
    lines = [f"kgraph 1"]
    lines += [f"vertex v{i}" for i in range(depth + 1)]
    lines += [f"vertex w{i}" for i in range(1, depth + 1)]
    lines.append("edge 1 e1 v0 v1")
    for i in range(2, depth + 1):
        lines.append(f"edge 1 e{i} v{i-1} v{i}")
    lines.append("edge 1 f1 v0 w1")
    for i in range(2, depth + 1):
        lines.append(f"edge 1 f{i} w{i-1} w{i}")
    lines.append(f"edge 1 lv v{depth} v{depth}")
    lines.append(f"edge 1 lw w{depth} w{depth}")
    return "\n".join(lines) + "\n"


def build_twin_chains(depth: int = 16) -> CatalogEntry:
    """Two chains meeting at a root, truncated and closed with loops at
    the cut; counting measure on both shift orbits."""
    g = load_kgraph(twin_chains_kg(depth), name="twin-chains")
    g.truncated = True
    lv, lw = edge_path(g, "lv"), edge_path(g, "lw")
    entries: List[Tuple[InfPath, Fraction]] = []
    p_orbit, q_orbit = [], []
    for i in range(depth + 1):
        pre = vertex_path(g, f"v{i}" if i else "v0")
        for j in range(i + 1, depth + 1):
            pre = compose(pre, edge_path(g, f"e{j}"))
        x = make_inf_path(pre, lv)
        entries.append((x, Fraction(1)))
        p_orbit.append(x)
    for i in range(depth + 1):
        if i == 0:
            pre = vertex_path(g, "v0")
        else:
            pre = vertex_path(g, f"w{i}")
        for j in range(i + 1, depth + 1):
            pre = compose(pre, edge_path(g, f"f{j}"))
        x = make_inf_path(pre, lw)
        entries.append((x, Fraction(1)))
        q_orbit.append(x)
    mu = atomic_measure(g, entries, [], depth)

    p_set, q_set = set(p_orbit), set(q_orbit)

    def restrict_p(sys: SBFS) -> set:
        return {a for a in sys.positive_atoms() if a in p_set}

    entry = CatalogEntry(
        name="twin-chains",
        description="two infinite chains from a common root (truncated, "
        "loop-closed); counting measure on the two shift orbits",
        graph=g,
        atomic=mu,
        restrict_atoms=restrict_p,
        expected={
            "irreducible": "reducible",
            "components": 2,
            "monic": "monic",
            "commutant_dim": 2,
            "restricted_irreducible": "irreducible",
            "restricted_commutant_dim": 1,
            "orbits_disjoint": True,
        },
    )
    entry.orbit_p = p_set
    entry.orbit_q = q_set
    return entry


LEDRAPPIER_A1 = (
    (1, 0, 0, 1),
    (1, 0, 0, 1),
    (0, 1, 1, 0),
    (0, 1, 1, 0),
)
LEDRAPPIER_A2 = (
    (1, 0, 1, 0),
    (1, 0, 1, 0),
    (0, 1, 0, 1),
    (0, 1, 0, 1),
)


def ledrappier_kg() -> str:
    verts = [f"p{i}" for i in range(1, 5)]
    edges: List[Edge] = []
    for r in range(4):
        for c in range(4):
            if LEDRAPPIER_A1[r][c]:
                edges.append(Edge(f"x{r+1}{c+1}", 1, verts[r], verts[c]))
            if LEDRAPPIER_A2[r][c]:
                edges.append(Edge(f"y{r+1}{c+1}", 2, verts[r], verts[c]))
    squares = forced_squares(verts, edges)
    lines = ["kgraph 2"] + [f"vertex {v}" for v in verts]
    lines += [f"edge {e.color} {e.name} {e.range} {e.source}" for e in edges]
    lines += [
        f"square {e} {f} = {fh} {eh}" for (e, f), (fh, eh) in sorted(squares.items())
    ]
    return "\n".join(lines) + "\n"


def build_ledrappier() -> CatalogEntry:
    """The rank-2 four-vertex block with commuting 2-row-sum matrices and
    the flat eigenvector."""
    g = load_kgraph(ledrappier_kg(), name="ledrappier")
    mu = eigen_measure(
        g, {v: Fraction(1) for v in g.vertices}, (Fraction(2), Fraction(2))
    )
    return CatalogEntry(
        name="ledrappier",
        description="rank-2 block with commuting adjacency matrices and flat "
        "common eigenvector (eigenvalues 2, 2)",
        graph=g,
        eigen=mu,
        expected={
            "adjacency_1": [list(r) for r in LEDRAPPIER_A1],
            "beta": ["2", "2"],
            "cofinal": True,
            "paths_of_degree_11_from_any_vertex": 4,
        },
    )


def ledrappier_chain_kg(blocks: int) -> Tuple[str, List[str]]:
    """Chain of rank-2 blocks linked by identity edges both ways.

    Returns the .kg text and the interior vertex list (all blocks that
    keep their full untruncated neighborhood).
    """
    verts = [f"b{b}p{i}" for b in range(blocks) for i in range(1, 5)]
    edges: List[Edge] = []

    def vn(b: int, i: int) -> str:
        return f"b{b}p{i+1}"

    for b in range(blocks):
        for r in range(4):
            for c in range(4):
                if LEDRAPPIER_A1[r][c]:
                    edges.append(Edge(f"b{b}x{r+1}{c+1}", 1, vn(b, r), vn(b, c)))
                if LEDRAPPIER_A2[r][c]:
                    edges.append(Edge(f"b{b}y{r+1}{c+1}", 2, vn(b, r), vn(b, c)))
    for b in range(blocks - 1):
        for i in range(4):
            # identity links, both directions, each color
            edges.append(Edge(f"i1f{b}p{i+1}", 1, vn(b, i), vn(b + 1, i)))
            edges.append(Edge(f"i1b{b}p{i+1}", 1, vn(b + 1, i), vn(b, i)))
            edges.append(Edge(f"i2f{b}p{i+1}", 2, vn(b, i), vn(b + 1, i)))
            edges.append(Edge(f"i2b{b}p{i+1}", 2, vn(b + 1, i), vn(b, i)))

    squares: Dict[Tuple[str, str], Tuple[str, str]] = {}
    by_rs: Dict[Tuple[int, str, str], List[Edge]] = {}
    for e in edges:
        by_rs.setdefault((e.color, e.range, e.source), []).append(e)

    def block_of(v: str) -> int:
        return int(v[1 : v.index("p")])

    def offset_of(v: str) -> int:
        return int(v[v.index("p") + 1 :]) - 1

    def find_edge(color: int, rng: str, src: str) -> Edge:
        lst = by_rs.get((color, rng, src), [])
        if len(lst) != 1:
            raise ValueError(f"edge lookup not unique: color {color} {rng}<-{src}")
        return lst[0]

    for e in edges:
        if e.color != 1:
            continue
        for f in edges:
            if f.color != 2 or f.range != e.source:
                continue
            # within-block pairs factor through the block square structure;
            # identity links slide edges to the neighboring copy.
            e_link = e.name.startswith("i1")
            f_link = f.name.startswith("i2")
            if not e_link and not f_link:
                b = block_of(e.range)
                mids = [
                    m
                    for m in range(4)
                    if LEDRAPPIER_A2[offset_of(e.range)][m]
                    and LEDRAPPIER_A1[m][offset_of(f.source)]
                ]
                if len(mids) != 1:
                    raise ValueError("block square not forced")
                mid = vn(b, mids[0])
                fh = find_edge(2, e.range, mid)
                eh = find_edge(1, mid, f.source)
            elif e_link and not f_link:
                # link edge then block color-2 edge: slide the color-2 edge
                b_t = block_of(e.range)
                mid = vn(b_t, offset_of(f.source))
                fh = find_edge(2, e.range, mid)
                eh = find_edge(1, mid, f.source)
            elif not e_link and f_link:
                b_t = block_of(f.source)
                mid = vn(b_t, offset_of(e.range))
                fh = find_edge(2, e.range, mid)
                eh = find_edge(1, mid, f.source)
            else:
                # two link edges: the color-2 image mirrors e's block move,
                # the color-1 image mirrors f's (sound at the chain ends)
                mid = vn(block_of(e.source), offset_of(e.range))
                fh = find_edge(2, e.range, mid)
                eh = find_edge(1, mid, f.source)
            squares[(e.name, f.name)] = (fh.name, eh.name)

    lines = ["kgraph 2"] + [f"vertex {v}" for v in verts]
    lines += [f"edge {e.color} {e.name} {e.range} {e.source}" for e in edges]
    lines += [
        f"square {a} {b} = {c} {d}" for (a, b), (c, d) in sorted(squares.items())
    ]
    interior = [f"b{b}p{i}" for b in range(blocks - 1) for i in range(1, 5)]
    return "\n".join(lines) + "\n", interior


def build_ledrappier_chain(blocks: int = 4) -> CatalogEntry:
    """Truncated chain of rank-2 blocks with the graded eigenvector
    (eigenvalue 4 per color on interior blocks)."""
    text, interior = ledrappier_chain_kg(blocks)
    g = load_kgraph(text, name="ledrappier-chain")
    g.truncated = True
    g.interior_vertices = frozenset(interior)
    xi = {
        f"b{b}p{i}": Fraction(b + 1) for b in range(blocks) for i in range(1, 5)
    }
    mu = eigen_measure(g, xi, (Fraction(4), Fraction(4)))
    return CatalogEntry(
        name="ledrappier-chain",
        description=f"chain of {blocks} rank-2 blocks linked by identity "
        "edges (truncated); graded eigenvector with eigenvalue 4 per color",
        graph=g,
        eigen=mu,
        expected={"beta": ["4", "4"], "truncated": True},
    )


def build_free_rank2() -> CatalogEntry:
    """One vertex, one loop per color: a single infinite path."""
    g = load_kgraph(FREE_RANK2_KG, name="free-rank2")
    a, b = edge_path(g, "a"), edge_path(g, "b")
    x = make_inf_path(vertex_path(g, "v"), compose(a, b))
    mu = atomic_measure(g, [(x, Fraction(1))], [])
    return CatalogEntry(
        name="free-rank2",
        description="single vertex free rank-2 graph; one-point path space",
        graph=g,
        atomic=mu,
        expected={
            "cofinal": True,
            "irreducible": "irreducible",
            "components": 1,
            "monic": "monic",
            "commutant_dim": 1,
        },
    )


def catalog() -> Dict[str, Callable[[], CatalogEntry]]:
    return {
        "bridged-loops": build_bridged_loops,
        "swap-loop": build_swap_loop,
        "loop-fan": build_loop_fan,
        "twin-chains": build_twin_chains,
        "ledrappier": build_ledrappier,
        "ledrappier-chain": build_ledrappier_chain,
        "free-rank2": build_free_rank2,
    }


def builtin_example(name: str) -> CatalogEntry:
    builders = catalog()
    if name not in builders:
        known = ", ".join(sorted(builders))
        raise KeyError(f"unknown example {name!r}; catalog: {known}")
    return builders[name]()
