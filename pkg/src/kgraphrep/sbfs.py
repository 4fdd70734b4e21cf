"""Semibranching function systems on atomic carriers.

A system consists of vertex domains partitioning the carrier, one
injective prefixing map per edge, and per-color coding maps that left
invert them.  On an atomic carrier every almost-everywhere condition
becomes a statement about positive-weight atoms, so all the defining
conditions are decidable and exact.

Carriers may be truncations of countable systems; atoms whose
degree-bounded prefix images stay inside the carrier are *interior*, and
validations quantify over interior atoms only (and say so).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Hashable, List, Optional, Sequence, Set, Tuple

from .degrees import Degree, add, basis, diag, ones, total, zero
from .infpaths import InfPath, in_cylinder, make_inf_path, prefix_path, render_inf_path, shift
from .kgraph import KGraph, KGraphError
from .measures import AtomicMeasure
from .paths import FinPath, compose, enumerate_paths, render_path, vertex_path
from .scalars import Radical

Atom = Hashable


class SBFSError(KGraphError):
    """Invalid semibranching data."""


class SBFSCorruption(SBFSError):
    """Observed structure contradicts the defining disjointness conditions."""


def _render_atom(a: Atom) -> str:
    return render_inf_path(a) if isinstance(a, InfPath) else str(a)


class SBFS:
    """Atomic semibranching function system over a k-graph.

    `edge_maps[e]` is the prefixing injection on the atoms of the domain
    of s(e); `coding[i]` is the color-i coding map.  Maps may be partial
    on truncated carriers; `interior(b)` is the set of atoms whose
    degree-<=b prefix images all stay inside the carrier.
    """

    def __init__(
        self,
        graph: KGraph,
        carrier: Sequence[Atom],
        weights: Dict[Atom, Fraction],
        domains: Dict[str, FrozenSet[Atom]],
        edge_maps: Dict[str, Dict[Atom, Atom]],
        coding: Dict[int, Dict[Atom, Atom]],
        kind: str,
        truncated: bool = False,
        label: str = "",
    ):
        self.graph = graph
        self.carrier: Tuple[Atom, ...] = tuple(carrier)
        self.weights = dict(weights)
        self.domains = {v: frozenset(s) for v, s in domains.items()}
        self.edge_maps = {e: dict(m) for e, m in edge_maps.items()}
        self.coding = {i: dict(m) for i, m in coding.items()}
        self.kind = kind
        self.truncated = truncated
        self.label = label
        self._range_cache: Dict[FinPath, FrozenSet[Atom]] = {}
        self._tau_cache: Dict[FinPath, Dict[Atom, Atom]] = {}
        self._interior_cache: Dict[int, FrozenSet[Atom]] = {}

    # -- basic structure ---------------------------------------------------

    def weight(self, a: Atom) -> Fraction:
        return self.weights.get(a, Fraction(0))

    def positive_atoms(self) -> List[Atom]:
        return [a for a in self.carrier if self.weight(a) > 0]

    def domain_of(self, lam: FinPath) -> FrozenSet[Atom]:
        return self.domains[lam.source]

    def vertex_of(self, a: Atom) -> str:
        for v, dom in self.domains.items():
            if a in dom:
                return v
        raise SBFSError(f"atom {_render_atom(a)} lies in no vertex domain")

    def tau(self, lam: FinPath) -> Dict[Atom, Atom]:
        """Prefixing map for a finite path, by composing edge maps."""
        if lam in self._tau_cache:
            return self._tau_cache[lam]
        if lam.is_vertex():
            out = {a: a for a in self.domains[lam.v]}
        else:
            chain = lam.chain()
            out = {}
            for a in self.domains[lam.source]:
                cur: Optional[Atom] = a
                for e in reversed(chain):
                    cur = self.edge_maps.get(e, {}).get(cur)
                    if cur is None:
                        break
                if cur is not None:
                    out[a] = cur
        self._tau_cache[lam] = out
        return out

    def tau_coding(self, n: Degree):
        """Coding map for degree n (partial dict composition)."""
        out = {a: a for a in self.carrier}
        for i in range(1, self.graph.rank + 1):
            for _ in range(n[i - 1]):
                step = self.coding.get(i, {})
                out = {
                    a: step[b]
                    for a, b in out.items()
                    if b in step
                }
        return out

    def range_set(self, lam: FinPath) -> FrozenSet[Atom]:
        if lam not in self._range_cache:
            if lam.is_vertex():
                self._range_cache[lam] = self.domains[lam.v]
            else:
                self._range_cache[lam] = frozenset(self.tau(lam).values())
        return self._range_cache[lam]

    def interior(self, budget: int) -> FrozenSet[Atom]:
        """Positive atoms whose degree-<=budget prefix images stay inside."""
        if budget in self._interior_cache:
            return self._interior_cache[budget]
        carrier = set(self.carrier)
        ok: Dict[Atom, bool] = {}

        def good(a: Atom, b: int) -> bool:
            if b == 0:
                return True
            key = (a, b)
            if key in ok:
                return ok[key]
            ok[key] = True  # cycles are fine: they stay inside
            v = self.vertex_of(a)
            for i in range(1, self.graph.rank + 1):
                for e in self.graph.edges_with_source(v, i):
                    img = self.edge_maps.get(e, {}).get(a)
                    if img is None or img not in carrier:
                        ok[key] = False
                        return False
                    if not good(img, b - 1):
                        ok[key] = False
                        return False
            return ok[key]

        out = frozenset(a for a in self.positive_atoms() if good(a, budget))
        self._interior_cache[budget] = out
        return out

    def fully_interior(self, budget: int) -> bool:
        return set(self.positive_atoms()) <= self.interior(budget)

    def measure(self) -> AtomicMeasure:
        """Positive-weight atoms as an atomic measure (standard carriers)."""
        if self.kind == "abstract":
            raise SBFSError("abstract carriers have no path-space measure")
        return AtomicMeasure(
            self.graph, {a: w for a, w in self.weights.items() if w > 0}, ()
        )

    def __repr__(self) -> str:
        return (
            f"SBFS({self.kind}, atoms={len(self.carrier)}"
            f"{', truncated' if self.truncated else ''})"
        )


# -- constructions ----------------------------------------------------------


def standard_sbfs(g: KGraph, mu: AtomicMeasure, label: str = "") -> SBFS:
    """The path-space system: prefixing and shifting on the atoms of mu.

    The carrier is the atom support closed under all shifts; closure
    points of weight zero are kept as exterior scaffolding.  Every vertex
    must carry positive mass.
    """
    from .infpaths import tail_set

    atoms: Set[InfPath] = set(mu.support())
    for x in mu.support():
        atoms |= tail_set(x)
    carrier = sorted(atoms, key=render_inf_path)
    weights = {x: mu.weight(x) for x in carrier}

    domains: Dict[str, Set[InfPath]] = {v: set() for v in g.vertices}
    for x in carrier:
        domains[x.range].add(x)
    for v in g.vertices:
        if sum((weights[x] for x in domains[v]), Fraction(0)) <= 0:
            raise SBFSError(f"vertex cylinder Z({v}) has zero atomic mass")

    edge_maps: Dict[str, Dict[Atom, Atom]] = {}
    carrier_set = set(carrier)
    for name, e in g.edges.items():
        m: Dict[Atom, Atom] = {}
        lam = None
        for x in domains[e.source]:
            y = prefix_path(_edge_fin(g, name), x)
            if y in carrier_set:
                m[x] = y
        edge_maps[name] = m

    coding: Dict[int, Dict[Atom, Atom]] = {}
    for i in range(1, g.rank + 1):
        coding[i] = {x: shift(x, basis(g.rank, i)) for x in carrier}

    return SBFS(
        g,
        carrier,
        weights,
        {v: frozenset(s) for v, s in domains.items()},
        edge_maps,
        coding,
        kind="standard",
        truncated=g.truncated or bool(mu.families),
        label=label,
    )


def _edge_fin(g: KGraph, name: str) -> FinPath:
    from .paths import edge_path

    return edge_path(g, name)


def abstract_sbfs(
    g: KGraph,
    atoms: Sequence[Atom],
    weights: Dict[Atom, Fraction],
    edge_maps: Dict[str, Dict[Atom, Atom]],
    vertex_domains: Dict[str, Set[Atom]],
    label: str = "",
) -> SBFS:
    """Assemble an abstract atomic system and derive its coding maps.

    Edge maps must be injections from the source domain with
    pairwise-disjoint images inside the range domain, one color at a
    time; the color-i coding map is the union of their inverses.
    """
    carrier = tuple(atoms)
    carrier_set = set(carrier)
    if len(carrier_set) != len(carrier):
        raise SBFSError("duplicate atoms in carrier")
    doms = {v: frozenset(vertex_domains.get(v, frozenset())) for v in g.vertices}
    seen: Set[Atom] = set()
    for v, dom in doms.items():
        if dom & seen:
            raise SBFSError(f"vertex domains overlap at {sorted(map(_render_atom, dom & seen))}")
        seen |= dom
    if seen != carrier_set:
        raise SBFSError("vertex domains must partition the carrier")
    for a in carrier:
        if Fraction(weights.get(a, 0)) <= 0:
            raise SBFSError(f"atom {_render_atom(a)} needs positive weight")

    for name, m in edge_maps.items():
        e = g.edge(name)
        dom = doms[e.source]
        if set(m) - set(dom):
            raise SBFSError(f"map {name}: domain escapes D_{e.source}")
        if len(set(m.values())) != len(m):
            raise SBFSError(f"map {name}: not injective")
        if set(m.values()) - set(doms[e.range]):
            bad = sorted(map(_render_atom, set(m.values()) - set(doms[e.range])))
            raise SBFSError(f"map {name}: image escapes D_{e.range} at {bad}")

    coding: Dict[int, Dict[Atom, Atom]] = {}
    for i in range(1, g.rank + 1):
        inv: Dict[Atom, Atom] = {}
        for name in g.edges_by_color[i]:
            for a, b in edge_maps.get(name, {}).items():
                if b in inv:
                    raise SBFSError(
                        f"color {i} ranges overlap at atom {_render_atom(b)}"
                    )
                inv[b] = a
        coding[i] = inv

    return SBFS(
        g,
        carrier,
        {a: Fraction(w) for a, w in weights.items()},
        doms,
        edge_maps,
        coding,
        kind="abstract",
        truncated=g.truncated,
        label=label,
    )


def restrict_sbfs(S: SBFS, keep: Set[Atom]) -> SBFS:
    """Restriction to an invariant atom subset with full vertex masses.

    Requires: every positive atom agrees with its coding images about
    membership in `keep`, and every vertex domain keeps positive mass.
    """
    pos = set(S.positive_atoms())
    for a in pos:
        inside = a in keep
        for i in range(1, S.graph.rank + 1):
            img = S.coding.get(i, {}).get(a)
            if img is not None and ((img in keep) != inside) and img in pos:
                raise SBFSError(
                    f"subset not invariant: atom {_render_atom(a)} vs its color-{i} shift"
                )
            if img is not None and inside and img not in keep:
                raise SBFSError(
                    f"subset not invariant: {_render_atom(a)} in, shift out"
                )
    for v in S.graph.vertices:
        mass = sum((S.weight(a) for a in S.domains[v] & set(keep)), Fraction(0))
        if mass <= 0:
            raise SBFSError(f"vertex domain D_{v} has zero mass on the subset")
    carrier = tuple(a for a in S.carrier if a in keep)
    return SBFS(
        S.graph,
        carrier,
        {a: S.weight(a) for a in carrier},
        {v: S.domains[v] & set(carrier) for v in S.graph.vertices},
        {e: {a: b for a, b in m.items() if a in keep and b in keep}
         for e, m in S.edge_maps.items()},
        {i: {a: b for a, b in m.items() if a in keep and b in keep}
         for i, m in S.coding.items()},
        kind="restricted" if S.kind != "abstract" else "abstract",
        truncated=S.truncated,
        label=f"{S.label}|restricted" if S.label else "restricted",
    )


# -- validation --------------------------------------------------------------


@dataclass
class SBFSReport:
    ok: bool
    failures: List[str]
    checked: int
    interior_size: int
    truncated: bool

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "failures": self.failures,
            "checked": self.checked,
            "interior_size": self.interior_size,
            "truncated": self.truncated,
        }


def validate_sbfs(S: SBFS, n_max: Degree) -> SBFSReport:
    """Check the defining conditions on interior atoms up to degree n_max.

    (a) per degree, ranges are disjoint and cover, with positive weight
    ratios; (b) vertex maps are identities; (c) prefixing composes; (d)
    coding maps compose and left invert the prefixing maps.
    """
    g = S.graph
    budget = total(n_max)
    interior = S.interior(budget)
    failures: List[str] = []
    checked = 0
    from .degrees import degrees_upto

    degs = [d for d in degrees_upto(g.rank, n_max) if any(d)]

    # (b) vertex identities
    for v in g.vertices:
        for a in S.domains[v]:
            checked += 1
            if S.tau(vertex_path(g, v)).get(a) != a:
                failures.append(f"(b) tau_{v} not identity at {_render_atom(a)}")

    # (a) partition and positivity per degree
    for d in degs:
        owner: Dict[Atom, FinPath] = {}
        for v in g.vertices:
            for lam in enumerate_paths(g, v, d):
                for a in S.domain_of(lam) & interior:
                    img = S.tau(lam).get(a)
                    checked += 1
                    if img is None:
                        continue
                    if S.weight(img) <= 0 < S.weight(a):
                        failures.append(
                            f"(a) zero-weight image: tau_{render_path(lam)}"
                            f"({_render_atom(a)}) kills positivity"
                        )
                    if img in owner and owner[img] != lam:
                        failures.append(
                            f"(a) ranges overlap at {_render_atom(img)}: "
                            f"{render_path(owner[img])} vs {render_path(lam)}"
                        )
                    owner[img] = lam
        for a in interior:
            if a not in owner:
                failures.append(
                    f"(a) atom {_render_atom(a)} not covered at degree {d}"
                )

    # (c) prefixing composes
    for d1 in degs:
        for v in g.vertices:
            for lam in enumerate_paths(g, v, d1):
                for d2 in degs:
                    if total(d1) + total(d2) > budget:
                        continue
                    for nu in enumerate_paths(g, lam.source, d2):
                        t_lam, t_nu = S.tau(lam), S.tau(nu)
                        t_comp = S.tau(compose(lam, nu))
                        for a in S.domain_of(nu) & interior:
                            checked += 1
                            via = t_lam.get(t_nu.get(a))
                            direct = t_comp.get(a)
                            if via is not None and direct is not None and via != direct:
                                failures.append(
                                    f"(c) tau_{render_path(lam)} tau_{render_path(nu)} "
                                    f"!= tau_{render_path(compose(lam, nu))} at {_render_atom(a)}"
                                )

    # (d) coding composes and left inverts
    for d1 in degs:
        c1 = S.tau_coding(d1)
        for d2 in degs:
            if total(d1) + total(d2) > budget:
                continue
            c2 = S.tau_coding(d2)
            c12 = S.tau_coding(add(d1, d2))
            for a in interior:
                checked += 1
                via = c2.get(c1.get(a)) if c1.get(a) is not None else None
                direct = c12.get(a)
                if via is not None and direct is not None and via != direct:
                    failures.append(
                        f"(d) coding {d1} then {d2} != coding {add(d1, d2)} "
                        f"at {_render_atom(a)}"
                    )
    for d in degs:
        cod = S.tau_coding(d)
        for v in g.vertices:
            for lam in enumerate_paths(g, v, d):
                t = S.tau(lam)
                for a in S.domain_of(lam) & interior:
                    img = t.get(a)
                    checked += 1
                    if img is not None and cod.get(img) != a:
                        failures.append(
                            f"(d) coding does not left invert tau_{render_path(lam)} "
                            f"at {_render_atom(a)}"
                        )

    return SBFSReport(
        ok=not failures,
        failures=failures,
        checked=checked,
        interior_size=len(interior),
        truncated=S.truncated,
    )


# -- derivatives and projective systems --------------------------------------


def rn_derivative(S: SBFS, lam: FinPath) -> Dict[Atom, Fraction]:
    """Weight-ratio derivative of the prefixing map on its domain atoms."""
    out: Dict[Atom, Fraction] = {}
    t = S.tau(lam)
    for a in sorted(S.domain_of(lam), key=_render_atom):
        if S.weight(a) <= 0:
            continue
        img = t.get(a)
        if img is None:
            continue
        if S.weight(img) <= 0:
            raise SBFSError(
                f"zero-weight image atom {_render_atom(img)} violates strict positivity"
            )
        out[a] = S.weight(img) / S.weight(a)
    return out


class ProjectiveSystem:
    """An SBFS together with weight functions supported on the ranges.

    The standard choice takes the inverse square root of the derivative
    on each range; explicit tables override it (used to model tampered
    or phase-twisted systems in tests).
    """

    def __init__(self, system: SBFS, table: Optional[Dict[FinPath, Dict[Atom, Radical]]] = None):
        self.system = system
        self._table = table or {}
        self._cache: Dict[FinPath, Dict[Atom, Radical]] = {}

    def f(self, lam: FinPath) -> Dict[Atom, Radical]:
        if lam in self._table:
            return self._table[lam]
        if lam not in self._cache:
            S = self.system
            out: Dict[Atom, Radical] = {}
            cod = S.tau_coding(lam.degree)
            for x in S.range_set(lam):
                y = cod.get(x)
                if y is None or S.weight(x) <= 0 or S.weight(y) <= 0:
                    continue
                out[x] = Radical.sqrt(S.weight(y) / S.weight(x))
            self._cache[lam] = out
        return self._cache[lam]

    def override(self, lam: FinPath, values: Dict[Atom, Radical]) -> "ProjectiveSystem":
        table = dict(self._table)
        table[lam] = values
        return ProjectiveSystem(self.system, table)


def standard_projective(S: SBFS) -> ProjectiveSystem:
    return ProjectiveSystem(S)


def validate_projective(P: ProjectiveSystem, n_max: Degree) -> SBFSReport:
    """Exact checks of the derivative and cocycle conditions up to n_max."""
    S = P.system
    g = S.graph
    budget = total(n_max)
    interior = S.interior(budget)
    failures: List[str] = []
    checked = 0
    from .degrees import degrees_upto

    degs = [d for d in degrees_upto(g.rank, n_max) if any(d)]
    all_paths = [
        lam for d in degs for v in g.vertices for lam in enumerate_paths(g, v, d)
    ]

    for lam in all_paths:
        fvals = P.f(lam)
        rng = S.range_set(lam)
        cod = S.tau_coding(lam.degree)
        for x, val in fvals.items():
            checked += 1
            if x not in rng:
                failures.append(
                    f"(support) f_{render_path(lam)} nonzero off its range "
                    f"at {_render_atom(x)}"
                )
                continue
            if x not in interior:
                continue
            y = cod.get(x)
            if y is None:
                continue
            expect = S.weight(y) / S.weight(x)
            if val.square() != expect:
                failures.append(
                    f"(a) |f_{render_path(lam)}|^2 != derivative at {_render_atom(x)}: "
                    f"{val.square()} vs {expect}"
                )

    for lam in all_paths:
        for nu in all_paths:
            if lam.source != nu.range:
                continue
            if total(lam.degree) + total(nu.degree) > budget:
                continue
            f_lam, f_nu = P.f(lam), P.f(nu)
            f_comp = P.f(compose(lam, nu))
            cod = S.tau_coding(lam.degree)
            for x in S.range_set(compose(lam, nu)) & interior:
                checked += 1
                y = cod.get(x)
                lhs = f_lam.get(x, Radical.of(0)) * (
                    f_nu.get(y, Radical.of(0)) if y is not None else Radical.of(0)
                )
                rhs = f_comp.get(x, Radical.of(0))
                if lhs != rhs:
                    failures.append(
                        f"(b) cocycle fails for ({render_path(lam)}, {render_path(nu)}) "
                        f"at {_render_atom(x)}: {lhs} vs {rhs}"
                    )

    return SBFSReport(
        ok=not failures,
        failures=failures,
        checked=checked,
        interior_size=len(interior),
        truncated=S.truncated,
    )


# -- the coding of atoms into the path space ---------------------------------


@dataclass
class PhiReport:
    mapping: Dict[Atom, Optional[InfPath]]
    injective: bool
    collisions: List[Tuple[str, str]]
    undetermined: List[str]

    def fibers(self) -> Dict[InfPath, List[Atom]]:
        out: Dict[InfPath, List[Atom]] = {}
        for a, x in self.mapping.items():
            if x is not None:
                out.setdefault(x, []).append(a)
        return out

    def as_dict(self) -> dict:
        return {
            "phi": {
                _render_atom(a): (render_inf_path(x) if x is not None else None)
                for a, x in sorted(self.mapping.items(), key=lambda kv: _render_atom(kv[0]))
            },
            "injective": self.injective,
            "collisions": [list(c) for c in self.collisions],
            "undetermined": self.undetermined,
        }


def encode_phi(S: SBFS, budget: int = 64) -> PhiReport:
    """Code each positive atom into the path space by its range history.

    The atom's unique degree-(1,..,1) range membership gives one diagonal
    block per step of the diagonal coding map; a repeat of the underlying
    atom closes the cycle.  Ambiguous membership contradicts range
    disjointness and raises; atoms whose history leaves the carrier
    before closing are reported undetermined (truncation).
    """
    g = S.graph
    one = ones(g.rank)
    blocks = [
        lam for v in g.vertices for lam in enumerate_paths(g, v, one)
    ]
    ranges = {lam: S.range_set(lam) for lam in blocks}
    step = S.tau_coding(one)

    mapping: Dict[Atom, Optional[InfPath]] = {}
    undetermined: List[str] = []
    for a in sorted(S.positive_atoms(), key=_render_atom):
        trail: List[Atom] = [a]
        words: List[FinPath] = []
        seen_at = {a: 0}
        x: Optional[InfPath] = None
        for _ in range(budget):
            cur = trail[-1]
            owners = [lam for lam in blocks if cur in ranges[lam]]
            if len(owners) > 1:
                raise SBFSCorruption(
                    f"atom {_render_atom(cur)} lies in two degree-(1,..,1) ranges: "
                    f"{render_path(owners[0])}, {render_path(owners[1])}"
                )
            if not owners:
                break
            words.append(owners[0])
            nxt = step.get(cur)
            if nxt is None:
                break
            if nxt in seen_at:
                i = seen_at[nxt]
                pre = vertex_path(g, words[0].range)
                for w in words[:i]:
                    pre = compose(pre, w)
                cyc = words[i]
                for w in words[i + 1 :]:
                    cyc = compose(cyc, w)
                x = make_inf_path(pre, cyc)
                break
            seen_at[nxt] = len(trail)
            trail.append(nxt)
        mapping[a] = x
        if x is None:
            undetermined.append(_render_atom(a))

    collisions: List[Tuple[str, str]] = []
    by_value: Dict[InfPath, Atom] = {}
    for a, x in mapping.items():
        if x is None:
            continue
        if x in by_value:
            collisions.append((_render_atom(by_value[x]), _render_atom(a)))
        else:
            by_value[x] = a
    return PhiReport(
        mapping=mapping,
        injective=not collisions and not undetermined,
        collisions=collisions,
        undetermined=undetermined,
    )


def pushforward_measure(S: SBFS, phi: Optional[PhiReport] = None) -> AtomicMeasure:
    """Image of the carrier weights under the path-space coding."""
    if phi is None:
        phi = encode_phi(S)
    atoms: Dict[InfPath, Fraction] = {}
    for a, x in phi.mapping.items():
        if x is None:
            raise SBFSError(
                f"cannot push forward: atom {_render_atom(a)} undetermined at budget"
            )
        atoms[x] = atoms.get(x, Fraction(0)) + S.weight(a)
    return AtomicMeasure(S.graph, atoms, ())
