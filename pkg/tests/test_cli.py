"""CLI smoke tests via click's runner."""

import json

import pytest
from click.testing import CliRunner

from interkey.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_synth")
    runner = CliRunner()
    result = runner.invoke(main, ["data", "synth", "--out", str(out),
                                  "--samples", "30", "--seed", "1"])
    assert result.exit_code == 0, result.output
    return out


class TestDataCommands:
    def test_synth_writes_manifest(self, synth_dir):
        assert (synth_dir / "manifest.jsonl").exists()

    def test_validate_ok(self, synth_dir):
        result = CliRunner().invoke(main, ["data", "validate",
                                           str(synth_dir / "manifest.jsonl")])
        assert result.exit_code == 0
        assert "OK" in result.output

    def test_validate_rejects_corrupt(self, synth_dir, tmp_path):
        bad = tmp_path / "bad.jsonl"
        lines = (synth_dir / "manifest.jsonl").read_text().splitlines()
        rec = json.loads(lines[1])
        rec["split"] = "test"
        rec2 = json.loads(lines[1])
        rec2["split"] = "train"
        bad.write_text("\n".join([lines[0], json.dumps(rec), json.dumps(rec2)]))
        result = CliRunner().invoke(main, ["data", "validate", str(bad)])
        assert result.exit_code != 0


class TestMorphologyStats:
    def test_stats_file_schema(self, synth_dir, tmp_path):
        out = tmp_path / "stats.json"
        result = CliRunner().invoke(main, ["morphology", "stats",
                                           str(synth_dir / "manifest.jsonl"),
                                           "--out", str(out)])
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert {"pairs", "triples", "selected", "k"} <= set(payload)
        first = payload["pairs"][0]
        assert {"indices", "mean", "std"} <= set(first)
        assert all(len(p["indices"]) == 2 for p in payload["pairs"])

    def test_top_k_mode(self, synth_dir, tmp_path):
        out = tmp_path / "stats.json"
        result = CliRunner().invoke(main, ["morphology", "stats",
                                           str(synth_dir / "manifest.jsonl"),
                                           "--out", str(out),
                                           "--mode", "top_k_low_variance",
                                           "--top-k", "7"])
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert len(payload["selected"]["pairs"]) == 7
        assert len(payload["selected"]["triples"]) == 7


class TestHelp:
    @pytest.mark.parametrize("args", [[], ["data"], ["morphology"], ["train", "--help"],
                                      ["eval", "--help"], ["serve", "--help"]])
    def test_help_screens(self, args):
        result = CliRunner().invoke(main, args + (["--help"] if "--help" not in args else []))
        assert result.exit_code == 0
