"""Measures on the infinite-path space.

Two exact families: eigenvector-induced cylinder measures (a common
positive eigenvector of the adjacency matrices gives the cylinder mass
beta^{-d(lam)} * xi at the source) and atomic measures on eventually
periodic paths, optionally with symbolic geometric tails so that chains
like u^n.rest keep exact closed-form cylinder masses past any
materialization budget.

The approximate Perron pathway lives here too but never mixes with the
exact verdicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import numpy as np

from .degrees import Degree, add, leq, scale, sub, total, zero
from .kgraph import KGraph, KGraphError, adjacency_matrix
from .infpaths import (
    InfPath,
    in_cylinder,
    make_inf_path,
    render_inf_path,
    tail_set,
)
from .paths import CylUnion, FinPath, compose, render_path, vertex_path


class MeasureError(KGraphError):
    """Invalid measure data or unsupported evaluation."""


# -- eigenvector-induced cylinder measures --------------------------------


@dataclass(frozen=True)
class EigenSystem:
    """A common positive eigenvector xi with per-color eigenvalues beta.

    Validation is exact over the rationals; for truncated graphs only the
    interior vertices are required to satisfy the eigen equations.
    """

    graph: KGraph
    xi: Dict[str, Fraction]
    beta: Tuple[Fraction, ...]

    def validate(self) -> None:
        g = self.graph
        if set(self.xi) != set(g.vertices):
            raise MeasureError("xi must assign a value to every vertex")
        if any(q <= 0 for q in self.xi.values()):
            raise MeasureError("xi must be strictly positive")
        if len(self.beta) != g.rank or any(b <= 0 for b in self.beta):
            raise MeasureError("beta must list one positive value per color")
        for i in range(1, g.rank + 1):
            A = adjacency_matrix(g, i)
            for r, v in enumerate(g.vertices):
                if not g.is_interior_vertex(v):
                    continue
                lhs = sum(
                    Fraction(A.entries[r][c]) * self.xi[w]
                    for c, w in enumerate(g.vertices)
                )
                rhs = self.beta[i - 1] * self.xi[v]
                if lhs != rhs:
                    raise MeasureError(
                        f"eigen equation fails at color {i}, vertex {v}: "
                        f"{lhs} != {rhs}"
                    )


# -- atomic measures -------------------------------------------------------


@dataclass(frozen=True)
class GeometricFamily:
    """Atoms unit^n . rest . cycle^inf with weight first * ratio^n.

    Members n < count are materialized as explicit atoms; the rest stay
    symbolic.  The unit must have strictly positive degree in every
    color so that eventual cylinder membership is decided by unit^inf.
    """

    unit: FinPath
    rest: FinPath
    cycle: FinPath
    ratio: Fraction
    first: Fraction
    count: int

    def member(self, n: int) -> InfPath:
        g = self.unit.graph
        p = vertex_path(g, self.unit.range)
        for _ in range(n):
            p = compose(p, self.unit)
        return make_inf_path(compose(p, self.rest), self.cycle)

    def weight(self, n: int) -> Fraction:
        return self.first * self.ratio**n

    def tail_mass(self) -> Fraction:
        """Total weight of the non-materialized members n >= count."""
        return self.first * self.ratio**self.count / (1 - self.ratio)

    def unit_stream(self) -> InfPath:
        return make_inf_path(vertex_path(self.unit.graph, self.unit.range), self.unit)


class AtomicMeasure:
    """Positive weights on canonical eventually periodic paths.

    Treat instances as immutable.  `atoms` maps canonical paths to exact
    weights and already contains the materialized family members.
    """

    def __init__(
        self,
        graph: KGraph,
        atoms: Dict[InfPath, Fraction],
        families: Sequence[GeometricFamily] = (),
    ):
        self.graph = graph
        self.atoms = dict(atoms)
        self.families = tuple(families)

    def weight(self, x: InfPath) -> Fraction:
        return self.atoms.get(x, Fraction(0))

    def support(self) -> FrozenSet[InfPath]:
        return frozenset(self.atoms)

    def total_mass(self) -> Fraction:
        out = sum(self.atoms.values(), Fraction(0))
        for fam in self.families:
            out += fam.tail_mass()
        return out

    def mass_of_cyl(self, lam: FinPath) -> Fraction:
        out = sum(
            (w for x, w in self.atoms.items() if in_cylinder(x, lam)), Fraction(0)
        )
        for fam in self.families:
            out += self._family_tail_in(fam, lam)
        return out

    def _family_tail_in(self, fam: GeometricFamily, lam: FinPath) -> Fraction:
        """Mass of the symbolic members n >= count inside Z(lam)."""
        need = max(lam.degree) if lam.degree else 0
        if fam.count * min(fam.unit.degree) < need:
            raise MeasureError(
                f"truncation budget {fam.count} too small to decide Z({render_path(lam)})"
                " membership for the symbolic tail; raise the budget"
            )
        return fam.tail_mass() if in_cylinder(fam.unit_stream(), lam) else Fraction(0)

    def restrict(self, keep: Set[InfPath]) -> "AtomicMeasure":
        """Restriction to an atom subset; symbolic families are dropped, so
        use on truncated carriers only after materialization."""
        return AtomicMeasure(
            self.graph, {x: w for x, w in self.atoms.items() if x in keep}, ()
        )


def atomic_measure(
    graph: KGraph,
    entries: Sequence[Tuple[InfPath, Fraction]],
    families: Sequence[GeometricFamily] = (),
    truncation: int = 16,
) -> AtomicMeasure:
    """Canonicalize atoms, merge duplicates, materialize family members.

    Duplicate atoms are merged only when their weights agree; conflicting
    duplicates and nonpositive weights are errors.
    """
    atoms: Dict[InfPath, Fraction] = {}

    def put(x: InfPath, w: Fraction) -> None:
        w = Fraction(w)
        if w <= 0:
            raise MeasureError(f"nonpositive weight {w} for atom {render_inf_path(x)}")
        if x in atoms and atoms[x] != w:
            raise MeasureError(
                f"conflicting duplicate atom {render_inf_path(x)}: {atoms[x]} vs {w}"
            )
        atoms[x] = w

    for x, w in entries:
        put(x, w)
    fams: List[GeometricFamily] = []
    for fam in families:
        if not (0 < fam.ratio < 1):
            raise MeasureError(f"geometric ratio must lie in (0,1), got {fam.ratio}")
        if fam.first <= 0:
            raise MeasureError(f"geometric first weight must be positive, got {fam.first}")
        if min(fam.unit.degree) < 1:
            raise MeasureError("family unit must have positive degree in every color")
        fam = GeometricFamily(
            fam.unit, fam.rest, fam.cycle, Fraction(fam.ratio), Fraction(fam.first),
            truncation if fam.count <= 0 else fam.count,
        )
        for n in range(fam.count):
            put(fam.member(n), fam.weight(n))
        fams.append(fam)
    return AtomicMeasure(graph, atoms, fams)


# -- unified cylinder-measure wrapper --------------------------------------


class CylMeasure:
    """Cylinder-set mass function backed by an eigen system or atoms."""

    def __init__(self, graph: KGraph, eigen: Optional[EigenSystem] = None,
                 atomic: Optional[AtomicMeasure] = None):
        if (eigen is None) == (atomic is None):
            raise MeasureError("exactly one of eigen/atomic must be given")
        self.graph = graph
        self.eigen = eigen
        self.atomic = atomic
        self._beta_pow: Dict[Degree, Fraction] = {}

    @property
    def mode(self) -> str:
        return "eigen" if self.eigen is not None else "atomic"

    def mass(self, lam: FinPath) -> Fraction:
        if self.eigen is not None:
            return self._beta_power(lam.degree) * self.eigen.xi[lam.source]
        return self.atomic.mass_of_cyl(lam)

    def _beta_power(self, d: Degree) -> Fraction:
        if d not in self._beta_pow:
            out = Fraction(1)
            for b, n in zip(self.eigen.beta, d):
                out /= b**n
            self._beta_pow[d] = out
        return self._beta_pow[d]

    def mass_union(self, cyl: CylUnion) -> Fraction:
        return sum((self.mass(p) for p in cyl.parts), Fraction(0))


def eigen_measure(g: KGraph, xi: Dict[str, Fraction], beta: Sequence[Fraction]) -> CylMeasure:
    """Exact cylinder measure from a validated common eigenvector."""
    sys = EigenSystem(g, {v: Fraction(q) for v, q in xi.items()},
                      tuple(Fraction(b) for b in beta))
    sys.validate()
    return CylMeasure(g, eigen=sys)


def cyl_mass(mu: CylMeasure, cyl: CylUnion) -> Fraction:
    return mu.mass_union(cyl)


def check_additivity(
    mu: CylMeasure,
    lam: FinPath,
    m: Degree,
    rng=None,
    rounds: int = 0,
) -> bool:
    """Refinement identity mu(Z(lam)) = sum over s(lam)Lambda^m of mu(Z(lam.gamma)).

    With an rng, additionally draws `rounds` random partition pairs of
    Z(lam) and checks that both decompositions carry the same mass (the
    well-definedness half of the construction).
    """
    from .paths import enumerate_paths

    g = lam.graph
    rhs = sum(
        (mu.mass(compose(lam, gamma)) for gamma in enumerate_paths(g, lam.source, m)),
        Fraction(0),
    )
    if rhs != mu.mass(lam):
        return False
    if rng is not None and rounds > 0:
        for _ in range(rounds):
            p1 = _random_partition(lam, m, rng)
            p2 = _random_partition(lam, m, rng)
            s1 = sum((mu.mass(p) for p in p1), Fraction(0))
            s2 = sum((mu.mass(p) for p in p2), Fraction(0))
            if s1 != s2 or s1 != mu.mass(lam):
                return False
    return True


def _random_partition(lam: FinPath, m: Degree, rng) -> List[FinPath]:
    """A random cylinder partition of Z(lam) by uneven refinement."""
    from .paths import enumerate_paths

    g = lam.graph
    parts = [lam]
    for _ in range(rng.randrange(1, 3)):
        idx = rng.randrange(len(parts))
        p = parts.pop(idx)
        step = tuple(rng.randrange(0, mi + 1) for mi in m)
        if not any(step):
            step = tuple(1 if i == rng.randrange(len(m)) else 0 for i in range(len(m)))
        parts.extend(compose(p, gamma) for gamma in enumerate_paths(g, p.source, step))
    return parts


# -- approximate Perron pathway --------------------------------------------


class PerronError(MeasureError):
    """Non-convergence or unusable spectrum in the power iteration."""


def perron_eigenvector(
    g: KGraph, tol: float = 1e-12, max_iter: int = 20000
) -> Tuple[Dict[str, float], Tuple[float, ...]]:
    """Power-iterate toward a common positive eigenvector, l1-normalized.

    Iterates the product of all adjacency matrices and reads off one
    eigenvalue per color via Rayleigh quotients; the residual
    ||A_i xi - beta_i xi||_inf <= tol * ||xi||_inf is enforced for every
    color.  Strictly an approximate pathway: never feeds exact verdicts.
    """
    mats = [np.array(adjacency_matrix(g, i).entries, dtype=float)
            for i in range(1, g.rank + 1)]
    n = len(g.vertices)
    if n == 0:
        raise PerronError("empty graph")
    P = mats[0].copy()
    for A in mats[1:]:
        P = P @ A
    x = np.ones(n) / n
    last = None
    for _ in range(max_iter):
        y = P @ x
        s = y.sum()
        if s <= 0:
            raise PerronError("product matrix annihilated the iterate; graph too sparse")
        y /= s
        if last is not None and np.max(np.abs(y - last)) < tol * 0.1:
            x = y
            break
        last, x = y, y
    else:
        raise PerronError(f"power iteration did not settle in {max_iter} steps")
    if np.min(x) <= max(tol, 1e-9) * np.max(x):
        raise PerronError("eigenvector not strictly positive (reducible graph?)")
    betas = []
    for A in mats:
        Ax = A @ x
        beta = float(x @ Ax / (x @ x))
        if np.max(np.abs(Ax - beta * x)) > tol * max(1.0, np.max(np.abs(x))):
            raise PerronError(
                "no common eigenvector at requested tolerance "
                "(periodic or reducible spectrum?)"
            )
        betas.append(beta)
    xi = {v: float(x[i]) for i, v in enumerate(g.vertices)}
    return xi, tuple(betas)


# -- invariance and ergodic decomposition ----------------------------------


class UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass
class ErgodicDecomposition:
    components: List[FrozenSet[InfPath]]
    constraint_graph_size: int
    jointly_ergodic: bool

    def as_dict(self) -> dict:
        return {
            "components": [
                sorted(render_inf_path(x) for x in comp) for comp in self.components
            ],
            "constraint_graph_size": self.constraint_graph_size,
            "jointly_ergodic": self.jointly_ergodic,
        }


def invariant_components(mu: AtomicMeasure) -> ErgodicDecomposition:
    """Partition the support into minimal invariant atom sets.

    For an atomic measure, a set is invariant under every coding map
    exactly when each positive atom sits in the same class as its whole
    tail set (weight-zero tail points transmit the constraints).  The
    classes restricted to the support are the minimal invariant sets, and
    the coding maps are jointly ergodic iff there is a single class.
    """
    support = sorted(mu.support(), key=render_inf_path)
    tails = {x: tail_set(x) for x in support}
    nodes: Set[InfPath] = set(support)
    for ts in tails.values():
        nodes |= ts
    uf = UnionFind(nodes)
    for x in support:
        for y in tails[x]:
            uf.union(x, y)
    groups: Dict[InfPath, List[InfPath]] = {}
    for x in support:
        groups.setdefault(uf.find(x), []).append(x)
    comps = sorted(
        (frozenset(v) for v in groups.values()),
        key=lambda c: min(render_inf_path(x) for x in c),
    )
    return ErgodicDecomposition(
        components=list(comps),
        constraint_graph_size=len(nodes),
        jointly_ergodic=len(comps) == 1 and bool(support),
    )


def minimal_invariant_sets(mu: AtomicMeasure) -> List[FrozenSet[InfPath]]:
    """The invariant components, each re-certified minimal in isolation."""
    decomp = invariant_components(mu)
    for comp in decomp.components:
        sub = invariant_components(mu.restrict(set(comp)))
        if len(sub.components) != 1:
            raise MeasureError(
                "internal error: component failed its own minimality re-check"
            )
    return decomp.components


def is_invariant_atom_set(mu: AtomicMeasure, subset: Set[InfPath]) -> bool:
    """Atomic invariance: the subset must be a union of constraint components."""
    comps = invariant_components(mu).components
    sub_support = {x for x in subset if x in mu.support()}
    for comp in comps:
        inter = sub_support & comp
        if inter and inter != set(comp):
            return False
    return True


def mutually_singular(m1: AtomicMeasure, m2: AtomicMeasure) -> bool:
    """Atomic mutual singularity: disjoint supports (canonical atoms)."""
    if m1.families or m2.families:
        raise MeasureError("mutual singularity needs fully materialized measures")
    return m1.support().isdisjoint(m2.support())
