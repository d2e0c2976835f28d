import json
import subprocess
import sys

import pytest

from stindex.cli import DEMO_DIR, build_parser, main

from conftest import PKG_ROOT

CASE_STUDY = DEMO_DIR / "schema.yaml"


@pytest.fixture(scope="module")
def demo_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    assert main(["demo", "--out", str(out)]) == 0
    return out


class TestExitCodes:
    def test_unknown_subcommand_is_user_error(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_no_subcommand_prints_usage(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_missing_gold_file(self, demo_out, capsys):
        code = main([
            "eval", "--config", str(CASE_STUDY),
            "--pred", str(demo_out / "run.jsonl"),
            "--gold", str(demo_out / "nope.jsonl"),
        ])
        assert code == 1
        assert "gold file not found" in capsys.readouterr().err

    def test_schema_validate_bad_schema(self, tmp_path, capsys):
        bad = tmp_path / "schema.yaml"
        bad.write_text("dimensions:\n  - name: only\n    kind: categorical\n"
                       "    vocabulary: [x]\n")
        assert main(["schema-validate", "--config", str(bad)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_schema_validate_ok(self, capsys):
        assert main(["schema-validate", "--config", str(CASE_STUDY)]) == 0
        out = capsys.readouterr().out
        assert "temporal" in out and "venue_type" in out


class TestDemoPipeline:
    def test_outputs_exist(self, demo_out):
        for name in ("run.jsonl", "manifest.json", "analytics.json",
                     "bundle.json", "report.json"):
            assert (demo_out / name).exists(), name

    def test_eval_subcommand_on_demo_run(self, demo_out, tmp_path, capsys):
        code = main([
            "eval", "--config", str(CASE_STUDY),
            "--pred", str(demo_out / "run.jsonl"),
            "--gold", str(DEMO_DIR / "gold.jsonl"),
            "--out", str(tmp_path / "report.json"),
        ])
        assert code == 0
        assert "Comb-F1" in capsys.readouterr().out
        report = json.loads((tmp_path / "report.json").read_text())
        assert report == json.loads((demo_out / "report.json").read_text())

    def test_analyze_subcommand(self, demo_out, tmp_path):
        code = main([
            "analyze", "--config", str(CASE_STUDY),
            "--run", str(demo_out / "run.jsonl"),
            "--out", str(tmp_path / "analytics.json"),
        ])
        assert code == 0
        assert (tmp_path / "analytics.json").read_bytes() == \
            (demo_out / "analytics.json").read_bytes()

    def test_export_dashboard_subcommand(self, demo_out, tmp_path):
        code = main([
            "export-dashboard", "--config", str(CASE_STUDY),
            "--run", str(demo_out / "run.jsonl"),
            "--manifest", str(demo_out / "manifest.json"),
            "--out", str(tmp_path / "bundle.json"),
        ])
        assert code == 0
        assert (tmp_path / "bundle.json").read_bytes() == \
            (demo_out / "bundle.json").read_bytes()

    def test_extract_replay_end_to_end(self, tmp_path):
        from stindex.engine import ExtractOptions, extract_document
        from stindex.ingest import load_document
        from stindex.llm import RecordingBackend
        from stindex.schema import parse_schema_file
        from stindex.store import read_run

        doc_path = tmp_path / "alert.txt"
        doc_path.write_text("A measles case was confirmed in Perth on 12 March 2024.")
        payload = json.dumps({
            "temporal": [{"text": "12 March 2024", "value": "2024-03-12",
                          "span": [41, 54], "confidence": 0.9}],
            "spatial": [{"text": "Perth", "value": "Perth", "span": [32, 37],
                         "confidence": 0.9}],
            "disease": [], "event_type": [], "venue_type": [],
        })
        recorder = RecordingBackend(lambda req: payload)
        extract_document(
            load_document(str(doc_path)), parse_schema_file(CASE_STUDY), recorder,
            ExtractOptions(reflection=False, model="demo-model"),
        )
        fixtures = tmp_path / "fixtures.json"
        fixtures.write_text(json.dumps(recorder.recorded))

        out = tmp_path / "run.jsonl"
        code = main([
            "extract", "--config", str(CASE_STUDY),
            "--backend", "replay", "--fixtures", str(fixtures),
            "--input", str(doc_path), "--out", str(out),
            "--no-reflection", "--manifest", str(tmp_path / "manifest.json"),
        ])
        assert code == 0
        (result,) = read_run(out)
        assert result.chunk_status == ["ok"]
        assert {e.dimension for e in result.entities} == {"temporal", "spatial"}
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["reflection"]["enabled"] is False

    def test_secrets_never_serialized(self, tmp_path, monkeypatch):
        secret = "sk-TEST-SENTINEL-VALUE-42"
        monkeypatch.setenv("STINDEX_API_KEY", secret)
        out = tmp_path / "demo"
        assert main(["demo", "--out", str(out)]) == 0
        for path in out.iterdir():
            assert secret not in path.read_text(encoding="utf-8"), path


class TestFixtureFreshness:
    def test_committed_fixtures_match_builder_output(self, tmp_path):
        sys.path.insert(0, str(PKG_ROOT / "tools"))
        try:
            import build_demo_fixtures
        finally:
            sys.path.pop(0)
        assert build_demo_fixtures.main(out_dir=tmp_path, verbose=False) == 0
        assert (tmp_path / "replay_fixtures.json").read_text() == \
            (DEMO_DIR / "replay_fixtures.json").read_text()
        assert (tmp_path / "gold.jsonl").read_text() == \
            (DEMO_DIR / "gold.jsonl").read_text()


class TestConsoleEntryPoint:
    def test_installed_script(self):
        proc = subprocess.run(
            [sys.executable, "-m", "stindex.cli", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "extract" in proc.stdout and "demo" in proc.stdout


class TestParser:
    def test_subcommands_registered(self):
        parser = build_parser()
        text = parser.format_help()
        for sub in ("extract", "analyze", "eval", "export-dashboard",
                    "schema-validate", "demo"):
            assert sub in text
