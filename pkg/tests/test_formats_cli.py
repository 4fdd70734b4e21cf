import json
import subprocess
import sys
from fractions import Fraction

import pytest

from kgraphrep.catalog import BRIDGED_LOOPS_KG, builtin_example
from kgraphrep.cli import PipelineConfig, main, run_pipeline
from kgraphrep.formats import FormatError, dump_atomic_measure, parse_measure, parse_sbfs
from kgraphrep.kgraph import load_kgraph
from kgraphrep.paths import edge_path, vertex_path


@pytest.fixture(scope="module")
def g():
    return load_kgraph(BRIDGED_LOOPS_KG)


MEASURE_TEXT = """\
# the bridged-loops measure
measure atomic
atom v1*e 1/4
atom v2*f 1/4
family e^n.g*f geometric 1/2 1/4
"""


def test_parse_atomic_measure(g):
    mu = parse_measure(g, MEASURE_TEXT, truncation=16)
    assert mu.mode == "atomic"
    assert mu.atomic.total_mass() == 1
    assert mu.mass(edge_path(g, "f")) == Fraction(1, 4)


def test_measure_roundtrip(g):
    mu = parse_measure(g, MEASURE_TEXT, truncation=16).atomic
    text = dump_atomic_measure(mu)
    mu2 = parse_measure(g, text, truncation=16).atomic
    assert mu.atoms == mu2.atoms


def test_parse_eigen_measure():
    e = builtin_example("ledrappier")
    text = "measure eigen\nbeta 2 2\nxi " + " ".join(
        f"{v}=1" for v in e.graph.vertices
    )
    mu = parse_measure(e.graph, text)
    assert mu.mode == "eigen"
    assert mu.mass(vertex_path(e.graph, "p1")) == 1


def test_parse_measure_errors(g):
    with pytest.raises(FormatError):
        parse_measure(g, "")
    with pytest.raises(FormatError, match="measure"):
        parse_measure(g, "atoms everywhere")
    with pytest.raises(FormatError, match="atom"):
        parse_measure(g, "measure atomic\natom v1*e\n")


def test_parse_abstract_sbfs():
    g = load_kgraph("kgraph 1\nvertex v\nedge 1 e v v\n")
    text = (
        "sbfs abstract\n"
        "domain v = {0, 1}\n"
        "weight 0 1\nweight 1 1\n"
        "map e: 0 -> 1\nmap e: 1 -> 0\n"
    )
    S = parse_sbfs(g, text)
    assert S.kind == "abstract"
    assert S.edge_maps["e"] == {"0": "1", "1": "0"}


def test_parse_standard_sbfs(g):
    text = "sbfs standard\n" + MEASURE_TEXT.split("\n", 0)[0]
    S = parse_sbfs(g, "sbfs standard\n" + MEASURE_TEXT)
    assert S.kind == "standard"
    assert len(S.positive_atoms()) == 18


def test_pipeline_empty():
    cfg = PipelineConfig(example="bridged-loops", analyses=[])
    assert run_pipeline(cfg) == {"analyses": []}


def test_pipeline_bundle():
    cfg = PipelineConfig(
        example="bridged-loops",
        analyses=["info", "cofinal", "periodicity", "irreducible", "monic"],
    )
    bundle = run_pipeline(cfg)
    assert bundle["flags"]["source_free"]
    assert bundle["cofinal"]["cofinal"] is False
    assert bundle["periodicity"]["h_per"] == ["v2"]
    assert bundle["irreducible"]["verdict"] == "reducible"
    assert bundle["monic"]["verdict"] == "monic"


def test_pipeline_rejects_bad_tol():
    cfg = PipelineConfig(example="bridged-loops", analyses=["info"], tol=0.5)
    with pytest.raises(Exception, match="tol"):
        run_pipeline(cfg)


def _run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_cli_example_irreducible(capsys):
    code, doc = _run_cli(["example", "bridged-loops", "--irreducible"], capsys)
    assert code == 0
    assert doc["schema"] == 1
    rep = doc["report"]["irreducible"]
    assert rep["verdict"] == "reducible"
    assert rep["evidence"]["components"] == 2


def test_cli_example_monic_swap(capsys):
    code, doc = _run_cli(["example", "swap-loop", "--monic"], capsys)
    assert code == 0
    assert doc["report"]["monic"]["verdict"] == "not monic"
    assert doc["report"]["monic"]["screens"]["unique_path_vertex"] == ["v"]


def test_cli_validate_broken_graph_exit2(tmp_path, capsys):
    bad = tmp_path / "broken.kg"
    bad.write_text(
        "kgraph 2\nvertex v\nedge 1 a v v\nedge 1 c v v\nedge 2 b v v\n"
        "square a b = b a\nsquare c b = b a\n"
    )
    code = main(["validate", str(bad)])
    err = capsys.readouterr().err
    assert code == 2
    assert "injective" in err or "surjective" in err


def test_cli_unknown_example_exit2(capsys):
    code = main(["example", "nope", "--monic"])
    assert code == 2
    assert "catalog" in capsys.readouterr().err


def test_cli_determinism(tmp_path, capsys):
    docs = []
    for _ in range(2):
        code, doc = _run_cli(["example", "bridged-loops", "--irreducible", "--cofinal"], capsys)
        assert code == 0
        doc.pop("generated_at")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]


def test_cli_json_out(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _ = _run_cli(
        ["cofinal", "--example", "loop-fan", "--json-out", str(out)], capsys
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["cofinal"]["witness"]["vertex"] == "w"


def test_cli_graph_file_flow(tmp_path, capsys):
    kg = tmp_path / "g.kg"
    kg.write_text(BRIDGED_LOOPS_KG)
    ms = tmp_path / "m.measure"
    ms.write_text(MEASURE_TEXT)
    code, doc = _run_cli(
        ["irreducible", "--graph", str(kg), "--measure", str(ms)], capsys
    )
    assert code == 0
    assert doc["report"]["irreducible"]["verdict"] == "reducible"


def test_cli_disjoint_example(capsys):
    code, doc = _run_cli(["disjoint", "--example", "twin-chains"], capsys)
    assert code == 0
    assert doc["report"]["disjoint"] is True


def test_cli_sbfs_file(tmp_path, capsys):
    kg = tmp_path / "g.kg"
    kg.write_text("kgraph 1\nvertex v\nedge 1 e v v\n")
    sb = tmp_path / "s.sbfs"
    sb.write_text(
        "sbfs abstract\ndomain v = 0 1\nweight 0 1\nweight 1 1\n"
        "map e: 0 -> 1\nmap e: 1 -> 0\n"
    )
    code, doc = _run_cli(
        ["monic", "--graph", str(kg), "--sbfs", str(sb)], capsys
    )
    assert code == 0
    assert doc["report"]["monic"]["verdict"] == "not monic"


def test_cli_entrypoint_subprocess():
    out = subprocess.run(
        [sys.executable, "-m", "kgraphrep.cli", "example", "--list"],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0
    doc = json.loads(out.stdout)
    assert "bridged-loops" in doc["catalog"]
