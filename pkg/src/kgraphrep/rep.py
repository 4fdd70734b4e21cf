"""Operator representations on weight-normalized atom bases.

Each path operator acts on the span of the carrier atoms as a signed
partial permutation: the entry at (x, coding(x)) is the weight function
value times a weight-normalization ratio, which has modulus one for any
valid projective system.  All relation checks compare entries exactly in
the radical scalar model (floats only as a declared fallback).

The commutant of such a family is computed exactly by propagating the
two-term linear constraints through a ratio-weighted union-find; its
dimension is the number of surviving classes.  On standard path-space
carriers this dimension must equal the number of minimal invariant
components of the measure, and the irreducibility engine treats any
disagreement as an internal inconsistency (a bug trap, not a verdict).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Hashable, List, Optional, Sequence, Set, Tuple

from .degrees import Degree, add, basis, diag, join, ones, sub, total, zero
from .infpaths import (
    InfPath,
    is_cofinal,
    periodic_pairs,
    render_inf_path,
    same_orbit,
    tail_set,
)
from .kgraph import KGraph, KGraphError, adjacency_matrix, structural_flags
from .measures import (
    AtomicMeasure,
    ErgodicDecomposition,
    invariant_components,
    mutually_singular,
)
from .paths import (
    CylUnion,
    FinPath,
    compose,
    enumerate_paths,
    render_path,
    vertex_path,
)
from .sbfs import (
    Atom,
    PhiReport,
    ProjectiveSystem,
    SBFS,
    SBFSError,
    _render_atom,
    encode_phi,
    pushforward_measure,
)
from .scalars import MixedRadicalSum, Radical, Scalar, scalar_add, scalar_eq, scalar_is_zero, scalar_mul


class InternalInconsistencyError(RuntimeError):
    """Two independent routes to the same verdict disagreed."""


class RepError(KGraphError):
    """Invalid operator-level request."""


# -- sparse operators ---------------------------------------------------------


class SparseOperator:
    """Entry map (row atom, col atom) -> scalar; zero entries omitted."""

    def __init__(self, entries: Optional[Dict[Tuple[Atom, Atom], Scalar]] = None):
        self.entries: Dict[Tuple[Atom, Atom], Scalar] = {}
        if entries:
            for key, val in entries.items():
                if not scalar_is_zero(val, 0.0 if isinstance(val, Radical) else 1e-300):
                    self.entries[key] = val

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        by_row: Dict[Atom, List[Tuple[Atom, Scalar]]] = {}
        for (r, c), v in other.entries.items():
            by_row.setdefault(r, []).append((c, v))
        out: Dict[Tuple[Atom, Atom], Scalar] = {}
        for (r, mid), v in self.entries.items():
            for c, w in by_row.get(mid, ()):
                key = (r, c)
                prod = scalar_mul(v, w)
                out[key] = scalar_add(out[key], prod) if key in out else prod
        return SparseOperator(out)

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        out = dict(self.entries)
        for key, v in other.entries.items():
            out[key] = scalar_add(out[key], v) if key in out else v
        return SparseOperator(out)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        neg = {k: scalar_mul(v, Radical.of(-1)) if isinstance(v, Radical) else -v
               for k, v in other.entries.items()}
        return self + SparseOperator(neg)

    def adjoint(self) -> "SparseOperator":
        # real scalar model: adjoint is the transpose
        return SparseOperator({(c, r): v for (r, c), v in self.entries.items()})

    def restrict(self, keep: Set[Atom]) -> "SparseOperator":
        return SparseOperator(
            {k: v for k, v in self.entries.items() if k[0] in keep and k[1] in keep}
        )

    def get(self, r: Atom, c: Atom) -> Scalar:
        return self.entries.get((r, c), Radical.of(0))

    def is_zero(self, tol: float = 1e-9) -> bool:
        return all(scalar_is_zero(v, tol) for v in self.entries.values())

    def equals(self, other: "SparseOperator", tol: float = 1e-9,
               mask: Optional[Set[Atom]] = None) -> bool:
        return not self.diff_witness(other, tol, mask)

    def diff_witness(self, other: "SparseOperator", tol: float = 1e-9,
                     mask: Optional[Set[Atom]] = None) -> Optional[Tuple[Atom, Atom]]:
        keys = set(self.entries) | set(other.entries)
        for key in keys:
            if mask is not None and not (key[0] in mask and key[1] in mask):
                continue
            if not scalar_eq(self.get(*key), other.get(*key), tol):
                return key
        return None

    def is_diagonal(self, tol: float = 1e-9) -> bool:
        return all(
            r == c or scalar_is_zero(v, tol) for (r, c), v in self.entries.items()
        )

    def __repr__(self) -> str:
        return f"SparseOperator({len(self.entries)} entries)"

    def dump(self) -> List[Tuple[str, str, str]]:
        """Coordinate text form (row, col, value), deterministically ordered."""
        rows = [
            (_render_atom(r), _render_atom(c), str(v))
            for (r, c), v in self.entries.items()
        ]
        return sorted(rows)


def identity_operator(atoms: Sequence[Atom]) -> SparseOperator:
    return SparseOperator({(a, a): Radical.of(1) for a in atoms})


def diagonal_operator(atoms: Sequence[Atom]) -> SparseOperator:
    return SparseOperator({(a, a): Radical.of(1) for a in atoms})


# -- frames -------------------------------------------------------------------


class Frame:
    """Ordered atom basis with interior marking and an operator cache."""

    def __init__(self, P: ProjectiveSystem, budget: Degree,
                 restrict_to: Optional[Set[Atom]] = None):
        S = P.system
        self.projective = P
        self.system = S
        self.budget = budget
        atoms = S.positive_atoms()
        if restrict_to is not None:
            atoms = [a for a in atoms if a in restrict_to]
        self.basis: Tuple[Atom, ...] = tuple(sorted(atoms, key=_render_atom))
        self.restricted = restrict_to is not None
        self.interior: FrozenSet[Atom] = frozenset(
            a for a in S.interior(total(budget)) if a in set(self.basis)
        )
        self._ops: Dict[FinPath, SparseOperator] = {}

    def sigma_closed(self) -> bool:
        """Whether all coding images of basis atoms stay in the basis."""
        bset = set(self.basis)
        for i in range(1, self.system.graph.rank + 1):
            step = self.system.coding.get(i, {})
            for a in self.basis:
                img = step.get(a)
                if img is not None and self.system.weight(img) > 0 and img not in bset:
                    return False
        return True

    def operator(self, lam: FinPath) -> SparseOperator:
        if lam not in self._ops:
            self._ops[lam] = build_operator(self.projective, self, lam)
        return self._ops[lam]


def build_operator(P: ProjectiveSystem, frame: Frame, lam: FinPath) -> SparseOperator:
    """Matrix of the path operator in the weight-normalized atom basis.

    Entry at (x, coding(x)) is f(x) * sqrt(w(x)/w(coding(x))) for x in
    the range of the path; columns whose preimage left the carrier are
    simply absent (truncation).
    """
    if not all(d <= b for d, b in zip(lam.degree, frame.budget)):
        raise RepError(
            f"path {render_path(lam)} exceeds the frame degree budget {frame.budget}"
        )
    S = frame.system
    fvals = P.f(lam)
    cod = S.tau_coding(lam.degree)
    bset = set(frame.basis)
    entries: Dict[Tuple[Atom, Atom], Scalar] = {}
    for x, val in fvals.items():
        if x not in bset:
            continue
        y = cod.get(x)
        if y is None or y not in bset:
            continue
        ratio = Radical.sqrt(S.weight(x) / S.weight(y))
        entries[(x, y)] = val * ratio
    return SparseOperator(entries)


# -- Cuntz-Krieger relation checks --------------------------------------------


@dataclass
class CKReport:
    ok: bool
    failures: List[str]
    relations_checked: int
    interior_size: int
    exact: bool
    truncated: bool

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "failures": self.failures[:20],
            "relations_checked": self.relations_checked,
            "interior_size": self.interior_size,
            "exact": self.exact,
            "truncated": self.truncated,
        }


def _paths_upto(g: KGraph, n_max: Degree) -> List[FinPath]:
    from .degrees import degrees_upto

    out = []
    for d in degrees_upto(g.rank, n_max):
        if not any(d):
            continue
        for v in g.vertices:
            out.extend(enumerate_paths(g, v, d))
    return out


def ck_check(frame: Frame, n_max: Optional[Degree] = None, tol: float = 1e-9) -> CKReport:
    """Verify the defining relations entrywise on interior atoms.

    Mutual orthogonality of vertex projections, multiplicativity,
    isometry on sources, the range decomposition at every degree within
    budget, and the minimal-common-extension product formula.
    """
    S = frame.system
    g = S.graph
    n_max = n_max or frame.budget
    interior = set(frame.interior)
    failures: List[str] = []
    checked = 0
    exact = True

    verts = {v: frame.operator(vertex_path(g, v)) for v in g.vertices}
    paths = [p for p in _paths_upto(g, n_max)]
    half = tuple(b // 2 for b in n_max)

    # (CK1)
    for v in g.vertices:
        for w in g.vertices:
            checked += 1
            prod = verts[v] @ verts[w]
            expect = verts[v] if v == w else SparseOperator()
            key = prod.diff_witness(expect, tol, interior)
            if key is not None:
                failures.append(f"(CK1) t_{v} t_{w} wrong at {_render_atom(key[0])}")

    # (CK2) on composable pairs within budget
    for lam in paths:
        for nu in paths:
            if lam.source != nu.range:
                continue
            if any(a + b > m for a, b, m in zip(lam.degree, nu.degree, n_max)):
                continue
            checked += 1
            lhs = frame.operator(lam) @ frame.operator(nu)
            rhs = frame.operator(compose(lam, nu))
            key = lhs.diff_witness(rhs, tol, interior)
            if key is not None:
                failures.append(
                    f"(CK2) t_{render_path(lam)} t_{render_path(nu)} != "
                    f"t_{render_path(compose(lam, nu))} at ({_render_atom(key[0])},"
                    f"{_render_atom(key[1])})"
                )

    # (CK3)
    for lam in paths:
        checked += 1
        T = frame.operator(lam)
        lhs = T.adjoint() @ T
        rhs = verts[lam.source]
        key = lhs.diff_witness(rhs, tol, interior)
        if key is not None:
            failures.append(
                f"(CK3) t*_{render_path(lam)} t_{render_path(lam)} != t_{lam.source} "
                f"at ({_render_atom(key[0])},{_render_atom(key[1])})"
            )

    # (CK4) for every vertex and degree within budget
    from .degrees import degrees_upto

    for d in degrees_upto(g.rank, n_max):
        if not any(d):
            continue
        for v in g.vertices:
            checked += 1
            acc = SparseOperator()
            for lam in enumerate_paths(g, v, d):
                T = frame.operator(lam)
                acc = acc + (T @ T.adjoint())
            key = acc.diff_witness(verts[v], tol, interior)
            if key is not None:
                failures.append(
                    f"(CK4) sum over {v}Lambda^{d} misses t_{v} at "
                    f"({_render_atom(key[0])},{_render_atom(key[1])})"
                )

    # minimal-common-extension product formula, on a degree-halved set so
    # the extension operators stay within budget
    from .paths import lambda_min

    small = [p for p in paths if all(a <= b for a, b in zip(p.degree, half))]
    for lam in small:
        for eta in small:
            checked += 1
            lhs = frame.operator(lam).adjoint() @ frame.operator(eta)
            acc = SparseOperator()
            for alpha, beta in sorted(
                lambda_min(lam, eta), key=lambda ab: render_path(ab[0])
            ):
                acc = acc + (frame.operator(alpha) @ frame.operator(beta).adjoint())
            key = lhs.diff_witness(acc, tol, interior)
            if key is not None:
                failures.append(
                    f"(min) t*_{render_path(lam)} t_{render_path(eta)} != "
                    f"sum over minimal extensions at ({_render_atom(key[0])},"
                    f"{_render_atom(key[1])})"
                )

    for op in frame._ops.values():
        if any(not isinstance(v, Radical) for v in op.entries.values()):
            exact = False
            break

    return CKReport(
        ok=not failures,
        failures=failures,
        relations_checked=checked,
        interior_size=len(interior),
        exact=exact,
        truncated=S.truncated,
    )


def pvm(frame: Frame, cyl: CylUnion) -> SparseOperator:
    """Projection onto the union of cylinder ranges: sum of t t* terms."""
    acc = SparseOperator()
    for lam in cyl.parts:
        T = frame.operator(lam)
        acc = acc + (T @ T.adjoint())
    return acc


# -- commutant ----------------------------------------------------------------


@dataclass
class CommutantReport:
    dim: int
    basis: List[SparseOperator]
    all_multiplication: bool
    generators: int

    def as_dict(self) -> dict:
        return {
            "dim": self.dim,
            "all_multiplication": self.all_multiplication,
            "generators": self.generators,
        }


def _signed_permutation(T: SparseOperator):
    """(dom->ran map, value map) if T has at most one entry per row/col."""
    rows: Dict[Atom, Tuple[Atom, Scalar]] = {}
    cols: Dict[Atom, Tuple[Atom, Scalar]] = {}
    for (r, c), v in T.entries.items():
        if r in rows or c in cols:
            return None
        rows[r] = (c, v)
        cols[c] = (r, v)
    return rows, cols


def commutant_dimension(frame: Frame, n_max: Optional[Degree] = None,
                        tol: float = 1e-9) -> CommutantReport:
    """Exact commutant of the truncated family on the frame basis.

    The defining equations M T = T M and M T* = T* M for a signed
    partial permutation T couple at most two matrix cells each, so the
    solution space is computed by a ratio-weighted union-find with zero
    propagation.  Vertex and edge operators generate the whole family,
    hence determine the same commutant as every path within budget.
    """
    if not frame.sigma_closed():
        raise RepError("commutant needs a coding-closed basis (finite carrier)")
    g = frame.system.graph
    gens: List[SparseOperator] = [
        frame.operator(vertex_path(g, v)) for v in g.vertices
    ]
    for name in sorted(g.edges):
        gens.append(frame.operator(_edge(g, name)))

    basis = frame.basis
    cells = [(r, c) for r in basis for c in basis]
    parent: Dict[Tuple[Atom, Atom], Tuple[Atom, Atom]] = {c: c for c in cells}
    weight: Dict[Tuple[Atom, Atom], Radical] = {c: Radical.of(1) for c in cells}
    dead: Set[Tuple[Atom, Atom]] = set()

    def find(cell):
        path = []
        while parent[cell] != cell:
            path.append(cell)
            cell = parent[cell]
        w = Radical.of(1)
        for p in reversed(path):
            w = w * weight[p]
            parent[p] = cell
            weight[p] = w
        return cell

    def cellweight(cell):
        root = find(cell)
        return root, weight[cell]

    def kill(cell):
        dead.add(find(cell))

    def link(a, b, ratio: Radical):
        # M_a = ratio * M_b
        ra, wa = cellweight(a)
        rb, wb = cellweight(b)
        if ra == rb:
            # wa * M_ra = M_a = ratio * M_b = ratio * wb * M_ra
            if wa != ratio * wb:
                dead.add(ra)
            return
        # attach rb under ra:  M_b = wb^{-1} ... solve M_rb in terms of M_ra
        # M_a = wa M_ra, M_b = wb M_rb, M_a = ratio M_b
        # => M_rb = wa / (ratio * wb) * M_ra
        parent[rb] = ra
        weight[rb] = wa / (ratio * wb)
        if rb in dead:
            dead.discard(rb)
            dead.add(ra)

    star_closed = gens + [T.adjoint() for T in gens]
    for T in star_closed:
        sp = _signed_permutation(T)
        if sp is None:
            raise RepError(
                "operator is not a signed partial permutation; "
                "commutant solver requires a valid projective system"
            )
        rows, cols = sp
        for i in basis:
            for j in basis:
                # (M T)_{i j} = M_{i, r} v   where T has entry (j', j)=v via cols[j]=(j', v)...
                # using: (MT)_{ij} = M_{i, row(j)} * val if column j occupied (T_{row(j), j})
                left = cols.get(j)   # T entry (left[0], j) with value left[1]
                right = rows.get(i)  # T entry (i, right[0]) with value right[1]
                if left is not None and right is not None:
                    # val_l * M_{i, left_row} = val_r * M_{right_col, j}
                    a = (i, left[0])
                    b = (right[0], j)
                    ratio = right[1] / left[1]
                    link(a, b, ratio)
                elif left is not None:
                    kill((i, left[0]))
                elif right is not None:
                    kill((right[0], j))

    groups: Dict[Tuple[Atom, Atom], List[Tuple[Atom, Atom]]] = {}
    for cell in cells:
        root = find(cell)
        if root in dead:
            continue
        groups.setdefault(root, []).append(cell)
    ops = []
    for root in sorted(groups, key=lambda rc: (_render_atom(rc[0]), _render_atom(rc[1]))):
        ops.append(SparseOperator({cell: weight[cell] for cell in groups[root]}))
    return CommutantReport(
        dim=len(ops),
        basis=ops,
        all_multiplication=all(op.is_diagonal(tol) for op in ops),
        generators=len(gens),
    )


def _edge(g: KGraph, name: str) -> FinPath:
    from .paths import edge_path

    return edge_path(g, name)


# -- monicity -----------------------------------------------------------------


@dataclass
class MonicityReport:
    verdict: str  # "monic" | "not monic"
    separation: bool
    phi_injective: bool
    screens: Dict[str, List[str]]
    monic_vector: Optional[Dict[str, str]]
    rank_ok: Optional[bool]
    total_mass: Fraction
    truncated: bool

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "separation": self.separation,
            "phi_injective": self.phi_injective,
            "screens": self.screens,
            "monic_vector": self.monic_vector,
            "rank_ok": self.rank_ok,
            "total_mass": str(self.total_mass),
            "truncated": self.truncated,
        }


def unique_path_vertices(g: KGraph) -> List[str]:
    """Vertices with exactly one path of every degree leaving toward sources.

    Exact criterion: every vertex in the range-to-source closure of v has
    exactly one outgoing edge of each color, so all the counting matrices
    have unit row sums along the closure.
    """
    out = []
    for v in g.vertices:
        closure = {v}
        frontier = [v]
        ok = True
        while frontier and ok:
            u = frontier.pop()
            for i in range(1, g.rank + 1):
                es = g.edges_with_range(u, i)
                if len(es) != 1:
                    ok = False
                    break
                w = g.edge(es[0]).source
                if w not in closure:
                    closure.add(w)
                    frontier.append(w)
        if ok:
            out.append(v)
    return out


def cycles_without_entrance(g: KGraph) -> List[str]:
    """Rank-1 only: vertices on a cycle none of whose vertices admits a
    second incoming edge."""
    if g.rank != 1:
        return []
    out = []
    for v in unique_path_vertices(g):
        # the unique outgoing chain from v; v lies on a cycle iff it returns
        seen = [v]
        u = v
        while True:
            u = g.edge(g.edges_with_range(u, 1)[0]).source
            if u == v:
                out.append(v)
                break
            if u in seen:
                break
            seen.append(u)
    return out


def _separating_prefix_depth(values: List[InfPath]) -> int:
    """Smallest diagonal depth at which all distinct paths separate."""
    from .infpaths import segment as _seg

    depth = 1
    while depth < 256:
        seen = {}
        clash = False
        for x in values:
            key = _seg(x, zero(x.graph.rank), diag(x.graph.rank, depth))
            if key in seen and seen[key] != x:
                clash = True
                break
            seen[key] = x
        if not clash:
            return depth
        depth += 1
    raise RepError("could not separate atom codes within depth 256")


def monicity_check(S: SBFS, P: ProjectiveSystem, budget: Optional[Degree] = None) -> MonicityReport:
    """Decide monicity on an atomic carrier.

    On atoms, the range sets generate the full sigma-algebra exactly when
    the path-space coding separates atoms, so the verdict is separation;
    the unique-path-vertex screen explains failures caused by a vertex
    whose domain cannot split.  When monic, the explicit vector (one
    weighted vertex-domain indicator per vertex) is emitted and the span
    of its range projections is certified full-rank.
    """
    g = S.graph
    budget = budget or diag(g.rank, 3)
    mass = sum((S.weight(a) for a in S.positive_atoms()), Fraction(0))

    screens: Dict[str, List[str]] = {"unique_path_vertex": [], "cycle_without_entrance": []}
    for v in unique_path_vertices(g):
        if len([a for a in S.domains[v] if S.weight(a) > 0]) >= 2:
            screens["unique_path_vertex"].append(v)
    for v in cycles_without_entrance(g):
        if len([a for a in S.domains[v] if S.weight(a) > 0]) >= 2:
            screens["cycle_without_entrance"].append(v)

    phi = encode_phi(S)
    separation = phi.injective
    verdict = "monic" if separation else "not monic"

    monic_vector = None
    rank_ok = None
    if separation:
        monic_vector = {}
        coeffs: Dict[Atom, Radical] = {}
        for n, v in enumerate(g.vertices, start=1):
            dom_mass = sum(
                (S.weight(a) for a in S.domains[v] if S.weight(a) > 0), Fraction(0)
            )
            if dom_mass <= 0:
                continue
            coeff = Radical.of(Fraction(1, n)) * (
                Radical.of(1) / Radical.sqrt(dom_mass)
            )
            monic_vector[v] = str(coeff)
            for a in S.domains[v]:
                if S.weight(a) > 0:
                    coeffs[a] = coeff
        rank_ok = _span_rank_full(S, phi, coeffs)
        if not rank_ok:
            verdict = "not monic"
            separation = False

    return MonicityReport(
        verdict=verdict,
        separation=separation,
        phi_injective=phi.injective,
        screens={k: v for k, v in screens.items() if v},
        monic_vector=monic_vector,
        rank_ok=rank_ok,
        total_mass=mass,
        truncated=S.truncated,
    )


def _span_rank_full(S: SBFS, phi: PhiReport, coeffs: Dict[Atom, Radical]) -> bool:
    """Rank of {range-projection masks of the monic vector} over the atoms.

    The masked vectors differ from 0/1 membership rows by the nonzero
    atom coefficients, so full rank of the exact 0/1 membership matrix
    (atoms x separating cylinders) is equivalent.
    """
    atoms = [a for a in S.positive_atoms()]
    values = [phi.mapping[a] for a in atoms]
    if any(v is None for v in values):
        return False
    depth = _separating_prefix_depth(values)
    from .infpaths import segment as _seg

    g = S.graph
    cols: List[FinPath] = []
    seen: Set[FinPath] = set()
    for d in range(depth + 1):
        for x in values:
            lam = _seg(x, zero(g.rank), diag(g.rank, d))
            if lam not in seen:
                seen.add(lam)
                cols.append(lam)
    # exact 0/1 rank over Q by Gaussian elimination
    matrix = [
        [Fraction(1) if _in_range(S, lam, a) else Fraction(0) for lam in cols]
        for a in atoms
    ]
    return _rank_fraction(matrix) == len(atoms)


def _in_range(S: SBFS, lam: FinPath, a: Atom) -> bool:
    return a in S.range_set(lam)


def _rank_fraction(rows: List[List[Fraction]]) -> int:
    mat = [r[:] for r in rows]
    rank = 0
    cols = len(mat[0]) if mat else 0
    for c in range(cols):
        piv = next((i for i in range(rank, len(mat)) if mat[i][c] != 0), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        inv = 1 / mat[rank][c]
        mat[rank] = [x * inv for x in mat[rank]]
        for i in range(len(mat)):
            if i != rank and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[rank])]
        rank += 1
        if rank == len(mat):
            break
    return rank


# -- purely atomic classification ---------------------------------------------


@dataclass
class PurelyAtomicReport:
    fiber_dims: Dict[str, int]
    support_in_single_orbit: bool
    all_one_dimensional: bool
    monic_consistent: bool

    def as_dict(self) -> dict:
        return {
            "fiber_dims": self.fiber_dims,
            "support_in_single_orbit": self.support_in_single_orbit,
            "all_one_dimensional": self.all_one_dimensional,
            "monic_consistent": self.monic_consistent,
        }


def purely_atomic_classify(S: SBFS, P: ProjectiveSystem) -> PurelyAtomicReport:
    """Atoms of the projection-valued measure as fibers of the coding.

    The point projection at a coded path has dimension equal to its fiber
    size; the representation is monic exactly when all fibers are
    singletons, and that verdict is cross-checked against the direct
    monicity decision.
    """
    phi = encode_phi(S)
    fibers = phi.fibers()
    if phi.undetermined:
        raise SBFSError("carrier has undetermined atom codes; raise the budget")
    dims = {render_inf_path(x): len(atoms) for x, atoms in fibers.items()}
    values = list(fibers)
    single_orbit = all(
        same_orbit(values[0], y) for y in values[1:]
    ) if values else True
    all_one = all(d == 1 for d in dims.values())
    monic = monicity_check(S, P)
    consistent = all_one == (monic.verdict == "monic")
    if not consistent:
        raise InternalInconsistencyError(
            "fiber dimensions disagree with the monicity verdict"
        )
    return PurelyAtomicReport(
        fiber_dims=dict(sorted(dims.items())),
        support_in_single_orbit=single_orbit,
        all_one_dimensional=all_one,
        monic_consistent=consistent,
    )


# -- irreducibility -------------------------------------------------------------


@dataclass
class IrreducibilityReport:
    verdict: str  # "irreducible" | "reducible" | "inconclusive"
    evidence: Dict[str, object]
    witnesses: Dict[str, object]
    truncated: bool

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "evidence": self.evidence,
            "witnesses": self.witnesses,
            "truncated": self.truncated,
        }


def _carrier_components(S: SBFS) -> List[FrozenSet[Atom]]:
    """Connected classes of atoms under all coding maps (abstract carriers)."""
    from .measures import UnionFind

    pos = S.positive_atoms()
    uf = UnionFind(set(S.carrier))
    for i in range(1, S.graph.rank + 1):
        for a, b in S.coding.get(i, {}).items():
            uf.union(a, b)
    groups: Dict[Atom, List[Atom]] = {}
    for a in pos:
        groups.setdefault(uf.find(a), []).append(a)
    return sorted(
        (frozenset(v) for v in groups.values()),
        key=lambda c: min(_render_atom(a) for a in c),
    )


def _periodic_ratio_screen(S: SBFS, P: ProjectiveSystem, depth: int = 4):
    """Character consistency of weight-function ratios on periodic ranges.

    Only pairs whose coding maps agree pointwise on the common range are
    eligible (the others are reported not-applicable).  Real scalars only
    admit angles 0 and 1/2; a solvable character system passes the
    screen, an unsolvable one is an obstruction to irreducibility.
    """
    from .infpaths import in_subgroup, subgroup_basis

    g = S.graph
    try:
        rep = periodic_pairs(g, depth)
    except KGraphError:
        return {"applicable": False, "reason": "graph not source-free"}
    h_per = set(rep.h_per)
    constraints = []  # (degree difference, angle)
    skipped = 0
    for lam, nu, _ in rep.certified_pairs:
        if lam.range != nu.range or lam.range not in h_per:
            continue
        common = S.range_set(lam) & S.range_set(nu)
        common = {x for x in common if S.weight(x) > 0}
        if not common:
            continue
        cod_l = S.tau_coding(lam.degree)
        cod_n = S.tau_coding(nu.degree)
        if any(cod_l.get(x) != cod_n.get(x) for x in common):
            skipped += 1
            continue
        f_l, f_n = P.f(lam), P.f(nu)
        ratios = set()
        for x in common:
            a, b = f_l.get(x), f_n.get(x)
            if a is None or b is None or b.is_zero():
                continue
            ratios.add(a / b)
        if not ratios:
            continue
        if len(ratios) > 1:
            return {"applicable": True, "consistent": False,
                    "reason": f"ratio not constant for ({render_path(lam)},{render_path(nu)})"}
        ratio = ratios.pop()
        if ratio.square() != 1:
            return {"applicable": True, "consistent": False,
                    "reason": f"ratio of modulus != 1 for ({render_path(lam)},{render_path(nu)})"}
        angle = Fraction(0) if ratio.coef > 0 else Fraction(1, 2)
        delta = tuple(a - b for a, b in zip(lam.degree, nu.degree))
        constraints.append((delta, angle))
    if not constraints:
        return {"applicable": bool(rep.certified_pairs), "consistent": True,
                "character": None, "skipped_pairs": skipped}
    theta = _solve_character(constraints, g.rank)
    if theta is None:
        return {"applicable": True, "consistent": False,
                "reason": "no single character matches all ratios"}
    return {
        "applicable": True,
        "consistent": True,
        "character": [str(t) for t in theta],
        "skipped_pairs": skipped,
    }


def _solve_character(constraints, k: int):
    """Solve g . theta = angle (mod 1) for theta in (Q/Z)^k, echelon style."""
    rows = [(list(map(Fraction, g)), Fraction(a)) for g, a in constraints if any(g)]
    for gvec, a in constraints:
        if not any(gvec) and a % 1 != 0:
            return None
    theta = [Fraction(0)] * k
    # triangularize by rational elimination, then check residues mod 1
    mat = [row[:] + [a] for row, a in rows]
    pivots = []
    r = 0
    for c in range(k):
        piv = next((i for i in range(r, len(mat)) if mat[i][c] != 0), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        for i in range(len(mat)):
            if i != r and mat[i][c] != 0:
                f = mat[i][c] / mat[r][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        pivots.append((r, c))
        r += 1
    for i in range(r, len(mat)):
        if mat[i][k] % 1 != 0:
            return None
    for row, c in reversed(pivots):
        theta[c] = mat[row][k] / mat[row][c]
    # verify mod 1
    for gvec, a in constraints:
        val = sum(Fraction(gi) * ti for gi, ti in zip(gvec, theta))
        if (val - a) % 1 != 0:
            return None
    return [t % 1 for t in theta]


def irreducibility_check(
    S: SBFS,
    P: ProjectiveSystem,
    frame: Optional[Frame] = None,
    restrict_to: Optional[Set[Atom]] = None,
    budget: Optional[Degree] = None,
) -> IrreducibilityReport:
    """Decide irreducibility of the representation (or its restriction).

    Pipeline: cofinality necessity for full carriers; invariant-component
    count on the coded path-space atoms (one component on a standard
    atomic carrier certifies irreducibility, several refute it); the
    designated-subset mode for restrictions whose vertex masses vanish;
    the periodic-ratio screen; and an exact commutant cross-check on any
    coding-closed frame, where disagreement raises an internal
    inconsistency instead of returning a verdict.
    """
    g = S.graph
    budget = budget or diag(g.rank, 3)
    evidence: Dict[str, object] = {}
    witnesses: Dict[str, object] = {}
    verdict: Optional[str] = None
    routes: List[str] = []

    flags = structural_flags(g)
    evidence["sink_free"] = flags.sink_free
    cofinal = None
    if flags.source_free and not g.truncated:
        cofinal = is_cofinal(g)
        evidence["cofinal"] = cofinal.verdict
        if cofinal.witness:
            witnesses["cofinality"] = cofinal.as_dict()["witness"]
    elif flags.source_free:
        cofinal = is_cofinal(g)
        evidence["cofinal"] = cofinal.verdict
        evidence["cofinal_at_truncation"] = True

    restricted = restrict_to is not None
    evidence["minimal_restriction_used"] = restricted

    if S.kind in ("standard", "restricted"):
        phi = encode_phi(S)
        if phi.undetermined:
            raise SBFSError("standard carrier has undetermined codes")
        push = pushforward_measure(S, phi)
        if restricted:
            keep_codes = {phi.mapping[a] for a in restrict_to if phi.mapping.get(a)}
            push = push.restrict(keep_codes)
        decomp = invariant_components(push)
        evidence["components"] = len(decomp.components)
        evidence["jointly_ergodic"] = decomp.jointly_ergodic
        witnesses["components"] = [
            sorted(render_inf_path(x) for x in comp)[:4] for comp in decomp.components
        ]
        if restricted:
            if len(decomp.components) == 1:
                verdict = "irreducible"
                routes.append(
                    "minimal-invariant-restriction" if flags.sink_free else "atomic-orbit"
                )
            else:
                verdict = "reducible"
                routes.append("invariant-components")
        else:
            meets_all = all(
                any(S.weight(a) > 0 for a in S.domains[v]) for v in g.vertices
            )
            if cofinal is not None and not cofinal.verdict and meets_all:
                verdict = "reducible"
                routes.append("not-cofinal")
                if len(decomp.components) < 2:
                    raise InternalInconsistencyError(
                        "non-cofinal full carrier must have >= 2 components"
                    )
            elif len(decomp.components) == 1:
                verdict = "irreducible"
                routes.append("jointly-ergodic-path-space")
            else:
                verdict = "reducible"
                routes.append("invariant-components")
    else:
        comps = _carrier_components(S)
        evidence["components"] = len(comps)
        evidence["jointly_ergodic"] = len(comps) == 1
        if len(comps) > 1:
            verdict = "reducible"
            routes.append("coding-maps-not-jointly-ergodic")
        if verdict is None and cofinal is not None and not cofinal.verdict:
            verdict = "reducible"
            routes.append("not-cofinal")
        if verdict is None:
            monic = monicity_check(S, P, budget)
            evidence["monic"] = monic.verdict
            if monic.verdict == "not monic":
                verdict = "reducible"
                routes.append("atomic-not-monic")

    screen = _periodic_ratio_screen(S, P)
    evidence["periodic_ratio"] = screen
    if screen.get("applicable") and not screen.get("consistent", True):
        if verdict == "irreducible":
            raise InternalInconsistencyError(
                "periodic-ratio obstruction on an irreducible verdict"
            )
        verdict = verdict or "reducible"
        routes.append("periodic-ratio-obstruction")

    if frame is None:
        try:
            frame = Frame(P, budget, restrict_to=restrict_to)
        except Exception:
            frame = None
    if frame is not None and frame.sigma_closed():
        comm = commutant_dimension(frame, budget)
        evidence["commutant_dim"] = comm.dim
        if S.kind in ("standard", "restricted"):
            if not comm.all_multiplication:
                raise InternalInconsistencyError(
                    "path-space commutant contains a non-multiplication operator"
                )
        if verdict is None:
            verdict = "irreducible" if comm.dim == 1 else "reducible"
            routes.append("commutant-dimension")
        elif (comm.dim == 1) != (verdict == "irreducible"):
            raise InternalInconsistencyError(
                f"commutant dimension {comm.dim} contradicts verdict {verdict}"
            )

    if verdict is None:
        verdict = "inconclusive"
    evidence["routes"] = routes
    return IrreducibilityReport(
        verdict=verdict,
        evidence=evidence,
        witnesses=witnesses,
        truncated=S.truncated or g.truncated,
    )


# -- disjointness ---------------------------------------------------------------


@dataclass
class DisjointnessReport:
    mutually_singular: bool
    disjoint: Optional[bool]
    direction: str

    def as_dict(self) -> dict:
        return {
            "mutually_singular": self.mutually_singular,
            "disjoint": self.disjoint,
            "direction": self.direction,
        }


def disjointness_check(
    S1: SBFS, P1: ProjectiveSystem, S2: SBFS, P2: ProjectiveSystem
) -> DisjointnessReport:
    """Disjointness of two representations via their measures.

    On standard path-space carriers the measures decide disjointness in
    both directions; on abstract carriers only `disjoint implies mutually
    singular` is available, so a singular pair is reported one-directional.
    """
    if S1.graph is not S2.graph:
        raise RepError("systems live on different graphs")
    standard = S1.kind in ("standard", "restricted") and S2.kind in (
        "standard",
        "restricted",
    )
    if standard:
        m1, m2 = S1.measure(), S2.measure()
    else:
        m1 = pushforward_measure(S1)
        m2 = pushforward_measure(S2)
    ms = mutually_singular(m1, m2)
    if standard:
        return DisjointnessReport(ms, ms, "iff (path-space carriers)")
    if not ms:
        return DisjointnessReport(False, False, "not singular, hence not disjoint")
    return DisjointnessReport(
        True, None, "one-directional: singular measures do not decide disjointness"
    )


def subrep_disjointness(S: SBFS, keep1: Set[Atom], keep2: Set[Atom]) -> DisjointnessReport:
    """Disjointness of two invariant-subset restrictions of one system.

    On a path-space carrier the restrictions are disjoint exactly when
    the restricted measures are mutually singular, i.e. the atom sets do
    not meet.
    """
    if S.kind == "abstract":
        raise RepError("subrepresentation comparison needs a path-space carrier")
    m1 = S.measure().restrict(set(keep1))
    m2 = S.measure().restrict(set(keep2))
    ms = mutually_singular(m1, m2)
    return DisjointnessReport(ms, ms, "iff (restrictions of a path-space system)")


# -- rank lowering (skeleton) ----------------------------------------------------


@dataclass
class SkeletonReport:
    one_graph: KGraph
    edge_to_path: Dict[str, FinPath]
    adjacency: Tuple[Tuple[int, ...], ...]
    transfer: Optional[Dict[str, object]]

    def as_dict(self) -> dict:
        from .kgraph import serialize_kgraph

        return {
            "one_graph": serialize_kgraph(self.one_graph),
            "edges": {
                name: render_path(p) for name, p in sorted(self.edge_to_path.items())
            },
            "adjacency": [list(r) for r in self.adjacency],
            "transfer": self.transfer,
        }


def skeleton(g: KGraph, J: Degree, measure: Optional[AtomicMeasure] = None) -> SkeletonReport:
    """Collapse to a rank-1 graph whose edges are the degree-J paths.

    The edge counts realize the product of adjacency powers prescribed by
    J.  With a measure, atoms are recoded block-by-block into the rank-1
    path space; irreducibility transfers from the skeleton system to the
    original one, and the report asserts that implication on the
    component counts.
    """
    from .kgraph import Edge, KGraph as KG

    if len(J) != g.rank or any(j < 1 for j in J):
        raise RepError(f"J must be strictly positive of rank {g.rank}")
    names: Dict[str, FinPath] = {}
    edges = []
    counter = 0
    for v in g.vertices:
        for p in enumerate_paths(g, v, J):
            nm = f"a{counter}"
            counter += 1
            names[nm] = p
            edges.append(Edge(nm, 1, p.range, p.source))
    one = KG(1, g.vertices, edges, {}, truncated=g.truncated,
             name=f"{g.name}-skeleton" if g.name else "skeleton")

    A = [[0] * len(g.vertices) for _ in g.vertices]
    idx = {v: i for i, v in enumerate(g.vertices)}
    for p in names.values():
        A[idx[p.range]][idx[p.source]] += 1

    transfer = None
    if measure is not None:
        by_path = {render_path(p): nm for nm, p in names.items()}
        from .infpaths import segment as _seg, shift as _shift
        from .paths import edge_path as _ep, vertex_path as _vp

        atoms: Dict[InfPath, Fraction] = {}
        for x, w in measure.atoms.items():
            z = x
            blocks: List[str] = []
            seen: Dict[InfPath, int] = {z: 0}
            coded = None
            for _ in range(4096):
                blk = _seg(z, zero(g.rank), J)
                blocks.append(by_path[render_path(blk)])
                z = _shift(z, J)
                if z in seen:
                    i = seen[z]
                    pre = _vp(one, x.range)
                    for b in blocks[:i]:
                        pre = compose(pre, _ep(one, b))
                    cyc = _ep(one, blocks[i])
                    for b in blocks[i + 1 :]:
                        cyc = compose(cyc, _ep(one, b))
                    from .infpaths import make_inf_path as _mk

                    coded = _mk(pre, cyc)
                    break
                seen[z] = len(blocks)
            if coded is None:
                raise RepError("atom recoding did not close; representation too large")
            atoms[coded] = atoms.get(coded, Fraction(0)) + w
        push = AtomicMeasure(one, atoms, ())
        c_orig = invariant_components(measure)
        c_skel = invariant_components(push)
        skel_irr = len(c_skel.components) == 1
        orig_irr = len(c_orig.components) == 1
        if skel_irr and not orig_irr:
            raise InternalInconsistencyError(
                "skeleton irreducible but original decomposes"
            )
        transfer = {
            "skeleton_components": len(c_skel.components),
            "original_components": len(c_orig.components),
            "transfer_holds": (not skel_irr) or orig_irr,
        }

    return SkeletonReport(
        one_graph=one,
        edge_to_path=names,
        adjacency=tuple(tuple(r) for r in A),
        transfer=transfer,
    )
