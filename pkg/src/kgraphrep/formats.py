"""Measure and system file formats (line-oriented, '#' comments).

Measure files::

    measure eigen
    beta 2 2
    xi v1=1 v2=1/2

    measure atomic
    atom g*f 1/4
    family e^n.g * f geometric 1/2 1/4

System files: `sbfs standard` followed by a measure section, or
`sbfs abstract` with `domain`, `weight` and `map` lines::

    sbfs abstract
    domain v = 0 1
    weight 0 1
    weight 1 1
    map e: 0 -> 1
    map e: 1 -> 0
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .kgraph import KGraph, KGraphError
from .measures import (
    AtomicMeasure,
    CylMeasure,
    GeometricFamily,
    atomic_measure,
    eigen_measure,
)
from .infpaths import InfPath, parse_inf_path, render_inf_path
from .paths import parse_path, render_path, vertex_path
from .sbfs import SBFS, abstract_sbfs, standard_sbfs


class FormatError(KGraphError):
    """Malformed measure/system file; carries the 1-based line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _clean_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_measure(g: KGraph, text: str, truncation: int = 16) -> CylMeasure:
    lines = list(_clean_lines(text))
    if not lines:
        raise FormatError("empty measure file", 1)
    lineno, head = lines[0]
    parts = head.split()
    if parts[0] != "measure" or len(parts) != 2 or parts[1] not in ("eigen", "atomic"):
        raise FormatError("expected `measure eigen` or `measure atomic`", lineno)
    if parts[1] == "eigen":
        return _parse_eigen(g, lines[1:])
    return CylMeasure(g, atomic=_parse_atomic(g, lines[1:], truncation))


def _parse_eigen(g: KGraph, lines) -> CylMeasure:
    beta: Optional[Tuple[Fraction, ...]] = None
    xi: Dict[str, Fraction] = {}
    for lineno, line in lines:
        tokens = line.split()
        if tokens[0] == "beta":
            if len(tokens) != g.rank + 1:
                raise FormatError(f"beta needs {g.rank} values", lineno)
            beta = tuple(Fraction(t) for t in tokens[1:])
        elif tokens[0] == "xi":
            for item in tokens[1:]:
                if "=" not in item:
                    raise FormatError(f"xi entry {item!r} needs v=q", lineno)
                v, q = item.split("=", 1)
                xi[v] = Fraction(q)
        else:
            raise FormatError(f"unknown measure directive {tokens[0]!r}", lineno)
    if beta is None:
        raise FormatError("missing beta line", 1)
    return eigen_measure(g, xi, beta)


def _parse_atomic(g: KGraph, lines, truncation: int) -> AtomicMeasure:
    entries: List[Tuple[InfPath, Fraction]] = []
    families: List[GeometricFamily] = []
    for lineno, line in lines:
        tokens = line.split()
        if tokens[0] == "atom":
            if len(tokens) != 3:
                raise FormatError("expected `atom <prefix>*<cycle> <weight>`", lineno)
            entries.append((parse_inf_path(g, tokens[1]), Fraction(tokens[2])))
        elif tokens[0] == "family":
            # family <unit>^n[.<rest>] * <cycle> geometric <ratio> <first>
            if "geometric" not in tokens:
                raise FormatError("family line needs `geometric <ratio> <first>`", lineno)
            gi = tokens.index("geometric")
            if len(tokens) != gi + 3:
                raise FormatError("family line needs `geometric <ratio> <first>`", lineno)
            pattern = "".join(tokens[1:gi])
            if "*" not in pattern or "^n" not in pattern:
                raise FormatError(
                    "family pattern must look like `<unit>^n[.<rest>] * <cycle>`", lineno
                )
            prefix_pat, cycle_s = pattern.split("*", 1)
            unit_s, rest_s = prefix_pat.split("^n", 1)
            rest_s = rest_s.lstrip(".")
            unit = parse_path(g, unit_s.strip())
            cycle = parse_path(g, cycle_s.strip())
            rest = (
                parse_path(g, rest_s.strip())
                if rest_s.strip()
                else vertex_path(g, unit.source)
            )
            families.append(
                GeometricFamily(
                    unit, rest, cycle, Fraction(tokens[gi + 1]),
                    Fraction(tokens[gi + 2]), truncation,
                )
            )
        else:
            raise FormatError(f"unknown measure directive {tokens[0]!r}", lineno)
    return atomic_measure(g, entries, families, truncation)


def dump_atomic_measure(mu: AtomicMeasure) -> str:
    lines = ["measure atomic"]
    fam_members = set()
    for fam in mu.families:
        for n in range(fam.count):
            fam_members.add(fam.member(n))
        rest = "" if fam.rest.is_vertex() else f".{render_path(fam.rest)}"
        lines.append(
            f"family {render_path(fam.unit)}^n{rest}*{render_path(fam.cycle)} "
            f"geometric {fam.ratio} {fam.first}"
        )
    for x in sorted(mu.atoms, key=render_inf_path):
        if x not in fam_members:
            pre = render_path(x.prefix)
            cyc = render_path(x.cycle)
            lines.append(f"atom {pre}*{cyc} {mu.atoms[x]}")
    return "\n".join(lines) + "\n"


def parse_sbfs(g: KGraph, text: str, truncation: int = 16) -> SBFS:
    lines = list(_clean_lines(text))
    if not lines:
        raise FormatError("empty system file", 1)
    lineno, head = lines[0]
    parts = head.split()
    if parts[0] != "sbfs" or len(parts) != 2 or parts[1] not in ("standard", "abstract"):
        raise FormatError("expected `sbfs standard` or `sbfs abstract`", lineno)
    if parts[1] == "standard":
        body = "\n".join(line for _, line in lines[1:])
        mu = parse_measure(g, body, truncation)
        if mu.atomic is None:
            raise FormatError("standard systems need an atomic measure", lineno)
        return standard_sbfs(g, mu.atomic)

    domains: Dict[str, set] = {}
    weights: Dict[str, Fraction] = {}
    edge_maps: Dict[str, Dict[str, str]] = {}
    for lineno, line in lines[1:]:
        tokens = line.replace("{", " ").replace("}", " ").replace(",", " ").split()
        if tokens[0] == "domain":
            if len(tokens) < 3 or tokens[2] != "=":
                raise FormatError("expected `domain <v> = <atoms...>`", lineno)
            domains[tokens[1]] = set(tokens[3:])
        elif tokens[0] == "weight":
            if len(tokens) != 3:
                raise FormatError("expected `weight <atom> <q>`", lineno)
            weights[tokens[1]] = Fraction(tokens[2])
        elif tokens[0] == "map":
            # map <edge>: a -> b
            body = line[len("map"):].strip()
            if ":" not in body or "->" not in body:
                raise FormatError("expected `map <edge>: a -> b`", lineno)
            edge, arrow = body.split(":", 1)
            a, b = arrow.split("->", 1)
            edge_maps.setdefault(edge.strip(), {})[a.strip()] = b.strip()
        else:
            raise FormatError(f"unknown system directive {tokens[0]!r}", lineno)
    atoms = sorted({a for dom in domains.values() for a in dom})
    return abstract_sbfs(g, atoms, weights, edge_maps, domains)
