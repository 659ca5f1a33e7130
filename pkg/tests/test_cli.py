import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import pytest

from dstesim.cli import main


def corpus(name: str) -> str:
    return resources.files("dstesim.data").joinpath(f"scenarios/{name}").read_text("utf-8")


class TestBatchMode:
    def test_smoke_script_exports(self, tmp_path, capsys):
        script = tmp_path / "smoke.script"
        script.write_text(corpus("smoke.script"))
        code = main(["--script", str(script), "--export-dir", str(tmp_path / "out"), "--trace"])
        assert code == 0
        out = capsys.readouterr().out
        assert "requests" in out
        summary = json.loads((tmp_path / "out" / "run0_summary.json").read_text())
        assert summary["counters"]["requests"] > 0
        assert (tmp_path / "out" / "run0_trace.jsonl").exists()

    def test_parse_error_exit_2(self, tmp_path, capsys):
        script = tmp_path / "bad.script"
        script.write_text("FROBNICATE everything\nRUN\n")
        assert main(["--script", str(script)]) == 2
        assert "parse error" in capsys.readouterr().err

    def test_semantic_error_exit_3(self, tmp_path, capsys):
        script = tmp_path / "bad.script"
        script.write_text(corpus("smoke.script").replace("BAM MAM", "BAM ATCS")
                          .replace("BC ALL 50 30 20", "BC ALL 60 30 20"))
        assert main(["--script", str(script)]) == 3
        assert "sum of BC exceeds capacity" in capsys.readouterr().err

    def test_missing_file_exit_3(self, tmp_path):
        assert main(["--script", str(tmp_path / "nope.script")]) == 3

    def test_serve_and_script_conflict(self, tmp_path):
        script = tmp_path / "s.script"
        script.write_text(corpus("smoke.script"))
        assert main(["--serve", "127.0.0.1:0", "--script", str(script)]) == 3


@pytest.mark.parametrize("name", ["smoke.script", "switch_demo.script", "nsfnet_cspf.script"])
def test_corpus_scripts_run(name, tmp_path):
    script = tmp_path / name
    script.write_text(corpus(name))
    assert main(["--script", str(script)]) == 0


def test_console_entrypoint_help():
    proc = subprocess.run([sys.executable, "-m", "dstesim.cli", "--script", "/nonexistent"],
                          capture_output=True, text=True)
    assert proc.returncode == 3
