"""Command-line surface: batch analyses over graph/measure/system files
or the built-in example catalog, with JSON reports on stdout.

Exit codes: 0 analysis completed (verdicts live in the payload), 2 input
error, 3 internal inconsistency (two independent routes disagreed).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .catalog import builtin_example, catalog
from .degrees import diag
from .formats import dump_atomic_measure, parse_measure, parse_sbfs
from .infpaths import is_cofinal, periodic_pairs
from .kgraph import (
    KGraph,
    KGraphError,
    adjacency_matrix,
    commuting_adjacency_problems,
    load_kgraph,
    serialize_kgraph,
    structural_flags,
    validate_factorization,
)
from .measures import CylMeasure, MeasureError, check_additivity, invariant_components
from .paths import enumerate_paths, parse_path
from .rep import (
    Frame,
    InternalInconsistencyError,
    ck_check,
    commutant_dimension,
    disjointness_check,
    irreducibility_check,
    monicity_check,
    purely_atomic_classify,
    skeleton,
)
from .sbfs import SBFS, standard_projective, validate_projective, validate_sbfs

SCHEMA = 1


@dataclass
class PipelineConfig:
    graph_path: Optional[str] = None
    measure_path: Optional[str] = None
    sbfs_path: Optional[str] = None
    example: Optional[str] = None
    truncate: int = 16
    degree: Optional[tuple] = None
    tol: float = 1e-9
    analyses: List[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.truncate <= 0:
            raise KGraphError("--truncate must be positive")
        if not (0 < self.tol <= 1e-3):
            raise KGraphError("--tol must lie in (0, 1e-3]")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_jsonable(v) for v in obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    if hasattr(obj, "as_dict"):
        return _jsonable(obj.as_dict())
    return str(obj)


def emit(payload: dict, json_out: Optional[str]) -> None:
    doc = {"schema": SCHEMA, "generated_at": _now()}
    doc.update(_jsonable(payload))
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if json_out:
        with open(json_out, "w") as fh:
            fh.write(text + "\n")


def _load_graph(cfg: PipelineConfig) -> KGraph:
    if cfg.example:
        return builtin_example(cfg.example).graph
    if not cfg.graph_path:
        raise KGraphError("no graph: pass --graph FILE or --example NAME")
    with open(cfg.graph_path) as fh:
        return load_kgraph(fh.read(), name=cfg.graph_path)


def _load_system(cfg: PipelineConfig):
    """(system, projective, entry-or-None) from flags or the catalog."""
    if cfg.example:
        entry = builtin_example(cfg.example)
        S = entry.build_system()
        return S, standard_projective(S), entry
    g = _load_graph(cfg)
    if cfg.sbfs_path:
        with open(cfg.sbfs_path) as fh:
            S = parse_sbfs(g, fh.read(), cfg.truncate)
        return S, standard_projective(S), None
    if cfg.measure_path:
        with open(cfg.measure_path) as fh:
            mu = parse_measure(g, fh.read(), cfg.truncate)
        if mu.atomic is None:
            raise KGraphError("standard systems need an atomic measure")
        from .sbfs import standard_sbfs

        S = standard_sbfs(g, mu.atomic)
        return S, standard_projective(S), None
    raise KGraphError("no system: pass --measure/--sbfs or --example NAME")


def _budget(cfg: PipelineConfig, g: KGraph) -> tuple:
    if cfg.degree is not None:
        if len(cfg.degree) != g.rank:
            raise KGraphError(f"--degree needs {g.rank} coordinates")
        return cfg.degree
    return diag(g.rank, 3)


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run the requested analyses in dependency order; bundle sub-reports."""
    cfg.validate()
    bundle: Dict[str, object] = {"analyses": list(cfg.analyses)}
    if not cfg.analyses:
        return bundle
    g = _load_graph(cfg)
    bundle["graph"] = g.name or cfg.graph_path
    bundle["truncated"] = g.truncated
    budget = _budget(cfg, g)

    S = P = entry = None

    def system():
        nonlocal S, P, entry
        if S is None:
            S, P, entry = _load_system(cfg)
        return S, P, entry

    for analysis in cfg.analyses:
        if analysis == "validate":
            bundle["validate"] = validate_factorization(g, 2).as_dict()
            bundle["commuting"] = commuting_adjacency_problems(g)
        elif analysis == "info":
            bundle["flags"] = structural_flags(g).as_dict()
            bundle["adjacency"] = {
                str(i): [list(r) for r in adjacency_matrix(g, i).entries]
                for i in range(1, g.rank + 1)
            }
        elif analysis == "cofinal":
            bundle["cofinal"] = is_cofinal(g).as_dict()
        elif analysis == "periodicity":
            bundle["periodicity"] = periodic_pairs(g, 4).as_dict()
        elif analysis == "measure":
            Ssys, _, _ = system()
            mu = Ssys.measure()
            bundle["measure"] = {
                "total_mass": str(mu.total_mass()),
                "components": invariant_components(mu).as_dict(),
            }
        elif analysis == "sbfs-check":
            Ssys, Psys, _ = system()
            bundle["sbfs_check"] = validate_sbfs(Ssys, budget).as_dict()
            bundle["projective_check"] = validate_projective(Psys, budget).as_dict()
        elif analysis == "ck-check":
            Ssys, Psys, _ = system()
            frame = Frame(Psys, budget)
            bundle["ck_check"] = ck_check(frame, budget, cfg.tol).as_dict()
        elif analysis == "monic":
            Ssys, Psys, _ = system()
            bundle["monic"] = monicity_check(Ssys, Psys, budget).as_dict()
            bundle["purely_atomic"] = purely_atomic_classify(Ssys, Psys).as_dict()
        elif analysis == "irreducible":
            Ssys, Psys, ent = system()
            bundle["irreducible"] = irreducibility_check(
                Ssys, Psys, budget=budget
            ).as_dict()
            if ent is not None and ent.restrict_atoms is not None:
                keep = ent.restrict_atoms(Ssys)
                bundle["irreducible_restricted"] = irreducibility_check(
                    Ssys, Psys, restrict_to=keep, budget=budget
                ).as_dict()
        elif analysis == "skeleton":
            mu = None
            if cfg.measure_path or cfg.example:
                try:
                    Ssys, _, _ = system()
                    if Ssys.kind != "abstract":
                        mu = Ssys.measure()
                except (KGraphError, ValueError):
                    mu = None
            rep = skeleton(g, diag(g.rank, 1), mu)
            bundle["skeleton"] = rep.as_dict()
        else:
            raise KGraphError(f"unknown analysis {analysis!r}")
    return bundle


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help=".kg graph file")
    p.add_argument("--measure", help="measure file")
    p.add_argument("--sbfs", help="system file")
    p.add_argument("--example", help="built-in example name")
    p.add_argument("--truncate", type=int, default=16, metavar="N")
    p.add_argument("--degree", help="degree budget d1,d2,...")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--json-out", help="also write the JSON report here")


def _cfg_from(args, analyses: List[str]) -> PipelineConfig:
    degree = None
    if args.degree:
        degree = tuple(int(t) for t in args.degree.split(","))
    return PipelineConfig(
        graph_path=args.graph,
        measure_path=args.measure,
        sbfs_path=getattr(args, "sbfs", None),
        example=args.example,
        truncate=args.truncate,
        degree=degree,
        tol=args.tol,
        analyses=analyses,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="kgraphrep",
        description="exact analyses of higher-rank graphs, path-space "
        "measures, and their operator representations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simple = [
        ("validate", ["validate"]),
        ("info", ["info"]),
        ("cofinal", ["cofinal"]),
        ("periodicity", ["periodicity"]),
        ("measure", ["measure"]),
        ("sbfs-check", ["sbfs-check"]),
        ("ck-check", ["ck-check"]),
        ("monic", ["monic"]),
        ("irreducible", ["irreducible"]),
        ("skeleton", ["skeleton"]),
    ]
    for name, analyses in simple:
        p = sub.add_parser(name)
        p.add_argument("positional_graph", nargs="?", help=".kg file")
        _add_common(p)
        p.set_defaults(analyses=analyses)

    p = sub.add_parser("disjoint", help="compare two systems on one graph")
    _add_common(p)
    p.add_argument("--measure2", help="second measure file")
    p.add_argument("--sbfs2", help="second system file")

    p = sub.add_parser("example", help="run catalog analyses")
    p.add_argument("name", nargs="?", help="example name")
    p.add_argument("--list", action="store_true")
    p.add_argument("--dump", metavar="DIR", help="write graph/measure files")
    for flag in ("irreducible", "monic", "ck-check", "cofinal", "periodicity",
                 "sbfs-check", "measure-check", "skeleton", "validate", "info"):
        p.add_argument(f"--{flag}", dest=flag.replace("-", "_"),
                       action="store_true")
    p.add_argument("--all", action="store_true")
    _add_common(p)

    p = sub.add_parser("pipeline", help="run several analyses in order")
    p.add_argument("--analyses", default="", help="comma-separated list")
    _add_common(p)

    args = parser.parse_args(argv)
    try:
        if args.command == "example":
            return _cmd_example(args)
        if args.command == "disjoint":
            return _cmd_disjoint(args)
        if args.command == "pipeline":
            cfg = _cfg_from(args, [a for a in args.analyses.split(",") if a])
            emit({"command": "pipeline", "report": run_pipeline(cfg)}, args.json_out)
            return 0
        if getattr(args, "positional_graph", None) and not args.graph:
            args.graph = args.positional_graph
        cfg = _cfg_from(args, args.analyses)
        emit({"command": args.command, "report": run_pipeline(cfg)}, args.json_out)
        return 0
    except InternalInconsistencyError as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return 3
    except (KGraphError, MeasureError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _cmd_example(args) -> int:
    if args.list or not args.name:
        emit({"command": "example", "catalog": sorted(catalog())}, args.json_out)
        return 0
    entry = builtin_example(args.name)
    if args.dump:
        import os

        os.makedirs(args.dump, exist_ok=True)
        with open(os.path.join(args.dump, f"{entry.name}.kg"), "w") as fh:
            fh.write(serialize_kgraph(entry.graph))
        if entry.atomic is not None:
            with open(os.path.join(args.dump, f"{entry.name}.measure"), "w") as fh:
                fh.write(dump_atomic_measure(entry.atomic))
    analyses = []
    for flag, name in (
        ("validate", "validate"), ("info", "info"), ("cofinal", "cofinal"),
        ("periodicity", "periodicity"), ("measure_check", "measure"),
        ("sbfs_check", "sbfs-check"), ("ck_check", "ck-check"),
        ("monic", "monic"), ("irreducible", "irreducible"),
        ("skeleton", "skeleton"),
    ):
        if getattr(args, flag, False) or args.all:
            analyses.append(name)
    cfg = _cfg_from(args, analyses)
    cfg.example = entry.name
    report = run_pipeline(cfg)
    report["expected"] = entry.expected
    report["description"] = entry.description
    emit({"command": "example", "name": entry.name, "report": report}, args.json_out)
    return 0


def _cmd_disjoint(args) -> int:
    cfg = _cfg_from(args, [])
    if cfg.example:
        entry = builtin_example(cfg.example)
        S = entry.build_system()
        P = standard_projective(S)
        from .measures import invariant_components as _ic
        from .rep import subrep_disjointness

        if hasattr(entry, "orbit_p"):
            keep1, keep2 = set(entry.orbit_p), set(entry.orbit_q)
        else:
            comps = _ic(S.measure()).components
            if len(comps) < 2:
                raise KGraphError("example has a single component; nothing to compare")
            keep1, keep2 = set(comps[0]), set(comps[1])
        rep = subrep_disjointness(S, keep1, keep2)
        emit({"command": "disjoint", "example": entry.name, "report": rep.as_dict()},
             args.json_out)
        return 0
    g = _load_graph(cfg)
    if not (args.measure and args.measure2):
        raise KGraphError("disjoint needs --measure and --measure2 (or --example)")
    from .sbfs import standard_sbfs

    with open(args.measure) as fh:
        m1 = parse_measure(g, fh.read(), cfg.truncate)
    with open(args.measure2) as fh:
        m2 = parse_measure(g, fh.read(), cfg.truncate)
    if m1.atomic is None or m2.atomic is None:
        raise KGraphError("disjointness compares atomic measures")
    S1, S2 = standard_sbfs(g, m1.atomic), standard_sbfs(g, m2.atomic)
    rep = disjointness_check(S1, standard_projective(S1), S2, standard_projective(S2))
    emit({"command": "disjoint", "report": rep.as_dict()}, args.json_out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
