import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from angiokit import phantom
from angiokit.cli import main
from angiokit.core import GrayImage, save_gray_image

SCHEMA_PATH = Path(__file__).resolve().parents[1] / "src" / "angiokit" / "docs" / "report-schema.json"


@pytest.fixture(scope="module")
def sten_image(tmp_path_factory):
    path = tmp_path_factory.mktemp("img") / "sten.png"
    img, _ = phantom.render_phantom(phantom.suite_spec("sten_r60"), 1)
    save_gray_image(img, path)
    return path


class TestAutoCommand:
    def test_detects_single_stenosis(self, sten_image, tmp_path):
        out = tmp_path / "auto"
        rc = main(["auto", str(sten_image), "--out", str(out), "--seed", "0"])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["findings"]) == 1
        assert (out / "overlay.png").exists()
        assert (out / "timings.json").exists()
        csvs = list(out.glob("segment_*.csv"))
        assert len(csvs) == len(report["segments"])
        header = csvs[0].read_text().splitlines()[0]
        assert header == "ordinal,x,y,diameter,degree"

    def test_report_matches_schema(self, sten_image, tmp_path):
        import jsonschema

        out = tmp_path / "auto"
        assert main(["auto", str(sten_image), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        schema = json.loads(SCHEMA_PATH.read_text())
        jsonschema.validate(report, schema)

    def test_blank_image_fails_cleanly(self, tmp_path, capsys):
        path = tmp_path / "blank.png"
        save_gray_image(GrayImage(np.zeros((64, 64))), path)
        rc = main(["auto", str(path), "--out", str(tmp_path / "o")])
        assert rc != 0
        assert "no ridge points" in capsys.readouterr().err

    def test_missing_config_uses_defaults(self, sten_image, tmp_path):
        rc = main(["auto", str(sten_image), "--out", str(tmp_path / "o"),
                   "--config", str(tmp_path / "absent.cfg")])
        assert rc == 0

    def test_determinism_byte_identical(self, sten_image, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["auto", str(sten_image), "--out", str(out1), "--seed", "3"]) == 0
        assert main(["auto", str(sten_image), "--out", str(out2), "--seed", "3"]) == 0
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


class TestPrepareCommand:
    def test_prepare_outputs(self, sten_image, tmp_path):
        out = tmp_path / "prep"
        rc = main(["prepare", str(sten_image), "--out", str(out), "--dump-stages"])
        assert rc == 0
        summary = json.loads((out / "prepare_summary.json").read_text())
        assert summary["ridge_points"] > 0
        assert (out / "contours.json").exists()
        for stage in ("denoised", "sharpened", "equalized", "vesselness", "tracking"):
            assert (out / f"stage_{stage}.png").exists()


class TestAnalyzeSegmentCommand:
    def test_segment_analysis(self, sten_image, tmp_path):
        out = tmp_path / "seg"
        rc = main(["analyze-segment", str(sten_image), "--start", "60,200",
                   "--end", "340,200", "--out", str(out)])
        assert rc == 0
        payload = json.loads((out / "segment.json").read_text())
        assert len(payload["route"]) > 10
        assert len(payload["findings"]) == 1

    def test_unreachable_fails(self, tmp_path):
        spec = phantom.PhantomSpec(
            name="pair", canvas=(300, 300),
            paths=(phantom.VesselPath(phantom.LinePath(50, 100, 250, 100),
                                      phantom.WidthProfile(7.0)),
                   phantom.VesselPath(phantom.LinePath(50, 200, 250, 200),
                                      phantom.WidthProfile(7.0))))
        img, _ = phantom.render_phantom(spec, 1)
        path = tmp_path / "pair.png"
        save_gray_image(img, path)
        rc = main(["analyze-segment", str(path), "--start", "150,100",
                   "--end", "150,200", "--out", str(tmp_path / "o")])
        assert rc == 3


class TestEvalPhantoms:
    def test_subset_run(self, tmp_path):
        out = tmp_path / "eval"
        rc = main(["eval-phantoms", "--only", "sten_r60", "--out", str(out)])
        assert rc == 0
        payload = json.loads((out / "evaluation.json").read_text())
        assert payload["detection"]["tp"] == 1
        assert payload["detection"]["fp"] == 0
        assert (out / "re_table.txt").exists()


def test_cli_entrypoint_runs():
    proc = subprocess.run([sys.executable, "-m", "angiokit.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("prepare", "auto", "analyze-segment", "eval-phantoms", "serve"):
        assert sub in proc.stdout
