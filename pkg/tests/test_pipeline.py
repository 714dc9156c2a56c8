import hashlib
import json
import shutil

import pytest

from mcp_risk.charts import cell_label, render_charts
from mcp_risk.cli import main
from mcp_risk.errors import ConfigError, UsageError
from mcp_risk.pipeline import CORE_ARTIFACTS, PipelineConfig, run_pipeline
from mcp_risk.report import FIGURES, ReportData, emit_report, read_report_file
from mcp_risk.scoring import score_corpus
from mcp_risk.surfaces import cooccurrence, default_surface_map, surface_shares

from conftest import CAPEC_FIXTURE, CWE_FIXTURE, FIXTURES, pipeline_args, profile


def digests(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "out"
    assert main(pipeline_args(out)) == 0
    return out


def test_run_writes_core_artifacts(run_dir):
    for name in CORE_ARTIFACTS:
        assert (run_dir / name).is_file(), name
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["catalog_versions"] == {"cwe": "CWE fixture-1.0", "capec": "CAPEC fixture-1.0"}
    assert set(manifest["tool_versions"]) >= {"mcp-risk"}
    assert len(manifest["config_hash"]) == 64
    for name, digest in manifest["artifacts"].items():
        assert hashlib.sha256((run_dir / name).read_bytes()).hexdigest() == digest
    assert not [p for p in run_dir.iterdir() if p.name.startswith(".staging")]


def test_skipped_tally(run_dir):
    text = (run_dir / "skipped.csv").read_text()
    assert "alpha,no CWE,1" in text and "alpha,unknown query,1" in text
    assert "beta,unmapped category,1" in text and "epsilon,no risk index for CWE-1333,1" in text


def test_missing_catalog_path(tmp_path, capsys):
    out = tmp_path / "out"
    args = pipeline_args(out)
    args[args.index("--cwe-xml") + 1] = str(tmp_path / "absent.xml")
    assert main(args) == 2
    assert not out.exists()
    assert "cwe-xml" in capsys.readouterr().err
    with pytest.raises(ConfigError, match="--capec-xml"):
        run_pipeline(PipelineConfig(cwe_xml=CWE_FIXTURE, findings_dir=FIXTURES / "corpus", out=out))


def test_parse_error_removes_partial_output(tmp_path):
    corpus = tmp_path / "corpus"
    shutil.copytree(FIXTURES / "corpus", corpus)
    (corpus / "zeta" / "broken.sarif").write_text("{nope")
    out = tmp_path / "out"
    args = pipeline_args(out)
    args[args.index("--findings-dir") + 1] = str(corpus)
    assert main(args) == 3
    assert not out.exists()


def test_scoring_error_exit_code(tmp_path):
    corpus = tmp_path / "corpus"
    (corpus / "only").mkdir(parents=True)
    (corpus / "only" / "x.sarif").write_text(json.dumps({"version": "2.1.0", "runs": [{"results": []}]}))
    args = pipeline_args(tmp_path / "out")
    args[args.index("--findings-dir") + 1] = str(corpus)
    assert main(args) == 4


def test_determinism_and_stage_isolation(run_dir, tmp_path):
    out = tmp_path / "again"
    assert main(pipeline_args(out, "--jobs", "3")) == 0
    assert digests(out) == digests(run_dir)
    (out / "scores.csv").unlink()
    assert main(pipeline_args(out)) == 0
    assert digests(out) == digests(run_dir)


def test_cwe_level_changes_config_hash(run_dir, tmp_path):
    out = tmp_path / "cwe"
    assert main(pipeline_args(out, "--dedup", "cwe-level")) == 0
    a = json.loads((run_dir / "manifest.json").read_text())["config_hash"]
    b = json.loads((out / "manifest.json").read_text())["config_hash"]
    assert a != b
    assert "alpha,4," in (run_dir / "scores.csv").read_text()
    assert "alpha,3," in (out / "scores.csv").read_text()


def test_config_file_overrides_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dedup": "cwe-level", "out": "from_config"}))
    assert main(pipeline_args(tmp_path / "from_flags", "--config", str(cfg))) == 0
    assert (tmp_path / "from_config" / "scores.csv").is_file()
    assert not (tmp_path / "from_flags").exists()
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(pipeline_args(tmp_path / "x", "--config", str(cfg))) == 2


def test_subcommands_agree_with_run(run_dir, tmp_path):
    cat, ing, sco, sur = (tmp_path / n for n in ("cat", "ing", "sco", "sur"))
    assert main(["catalog", "--cwe-xml", str(CWE_FIXTURE), "--capec-xml", str(CAPEC_FIXTURE),
                 "--out", str(cat)]) == 0
    assert main(["ingest", "--findings-dir", str(FIXTURES / "corpus"),
                 "--joern-manifest", str(FIXTURES / "joern_manifest.csv"),
                 "--scanner-map", str(FIXTURES / "scanner_map.csv"), "--out", str(ing)]) == 0
    common = ["--risk-table", str(cat / "risk_index.csv"), "--profiles", str(ing / "profiles.json")]
    assert main(["score", *common, "--out", str(sco)]) == 0
    assert main(["surfaces", *common, "--out", str(sur)]) == 0
    for d, name in [(cat, "risk_index.csv"), (ing, "profiles.json"), (sco, "scores.csv"),
                    (sco, "band_distribution.csv"), (sur, "surface_shares.csv"),
                    (sur, "cooccurrence.csv"), (sur, "chains.csv")]:
        assert (d / name).read_bytes() == (run_dir / name).read_bytes(), name


def test_harvest_subcommand(tmp_path, capsys):
    snap = tmp_path / "snap.json"
    assert main(["harvest", "--out", str(snap)]) == 2
    assert main(["harvest", "--replay", str(FIXTURES / "harvest" / "two_pages.json"),
                 "--pages", "1", "--out", str(snap)]) == 0
    doc = json.loads(snap.read_text())
    assert [r["full_name"] for r in doc["repositories"]] == ["acme/files-mcp-server"]
    assert doc["exclusions"] == [{"full_name": "octo/mcp-client-cli", "reason": "client-only project"}]


# report and charts

def test_report_files(run_dir, tmp_path):
    paths = emit_report(ReportData.from_artifacts(run_dir), tmp_path / "rep")
    assert [p.name for p in paths] == [f"{s}.csv" for s in FIGURES.values()]
    for p in paths:
        assert p.read_text().splitlines()[0]
    assert [p.read_bytes() for p in paths] == [(run_dir / "report" / p.name).read_bytes() for p in paths]
    fig4 = read_report_file(paths[0])
    # 22, 78, 89 and 862 each occur 3 times; ties go by CWE id
    assert [(r["cwe_id"], r["findings"]) for r in fig4[:4]] == [("22", "3"), ("78", "3"), ("89", "3"), ("862", "3")]
    json_paths = emit_report(ReportData.from_artifacts(run_dir), tmp_path / "rj", fmt="json")
    assert json.loads(json_paths[3].read_text())[0] == {"band": "VeryLow", "count": 2}


def _three_repo_data(bands=None):
    profs = {"r1": profile("r1", {78: 1, 862: 1}), "r2": profile("r2", {862: 1}),
             "r3": profile("r3", {78: 1})}
    w = {78: 50.0, 862: 20.0}
    mapping = default_surface_map()
    return ReportData(risk={c: ("", v) for c, v in w.items()}, profiles=profs,
                      scores=score_corpus(profs, w), shares=surface_shares(profs, w, mapping),
                      matrix=cooccurrence(profs, mapping), surface_map=mapping)


def test_band_histogram_rows(tmp_path):
    data = _three_repo_data()
    # overalls: r1 and r3 share the top, r2 is lowest
    paths = emit_report(data, tmp_path)
    assert read_report_file(paths[3]) == [{"band": "VeryLow", "count": "1"},
                                          {"band": "VeryHigh", "count": "2"}]


def test_report_errors(tmp_path):
    data = _three_repo_data()
    with pytest.raises(UsageError):
        emit_report(data, tmp_path, fmt="xlsx")
    data.scores = score_corpus({"z": profile("z", {})} | {"y": profile("y", {78: 1})}, {78: 1.0})
    data.scores = [s for s in data.scores if not s.scored]
    with pytest.raises(UsageError, match="no scored repositories"):
        emit_report(data, tmp_path)


def test_charts(tmp_path):
    paths = emit_report(_three_repo_data(), tmp_path / "rep")
    grid = {r["given"]: r for r in read_report_file(paths[4])}
    assert cell_label(float(grid["Tool"]["Protocol"])) == "50"
    svgs = render_charts(tmp_path / "rep", tmp_path / "svg")
    assert len(svgs) == 5 and all(p.suffix == ".svg" for p in svgs)
    heat = svgs[4].read_text()
    assert ">50<" in heat
    again = render_charts(paths, tmp_path / "svg2")
    assert [p.read_bytes() for p in svgs] == [p.read_bytes() for p in again]


def test_cell_label_rounding():
    assert [cell_label(v) for v in (None, 87.5, 12.5, 66.66, 100.0)] == ["", "88", "13", "67", "100"]


def test_charts_missing_file(tmp_path):
    emit_report(_three_repo_data(), tmp_path)
    (tmp_path / "fig7_surface_shares.csv").unlink()
    with pytest.raises(ConfigError, match="fig7_surface_shares"):
        render_charts(tmp_path, tmp_path / "svg")


def test_report_subcommand_renders(run_dir, tmp_path):
    assert main(["report", "--artifacts", str(run_dir), "--out", str(tmp_path), "--render"]) == 0
    assert len(list((tmp_path / "charts").glob("*.svg"))) == 5
    assert main(["report", "--artifacts", str(run_dir), "--out", str(tmp_path), "--format", "pdf"]) == 2
    assert main(["report", "--artifacts", str(tmp_path / "nothing"), "--out", str(tmp_path)]) == 2
