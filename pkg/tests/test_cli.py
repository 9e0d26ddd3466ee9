import csv

import numpy as np
import pytest

from lumenforce.cli import main
from lumenforce.phantom import (
    four_contact_growth_scenario,
    save_geometry,
    save_scenario,
)
from lumenforce.rigidity import save_profile, synthetic_reference_profile


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Full CLI pipeline on a short scenario: simulate -> segment ->
    estimate -> report."""
    root = tmp_path_factory.mktemp("pipeline")
    profile = synthetic_reference_profile()
    geometry, scenario = four_contact_growth_scenario(profile)
    scenario.frames = scenario.frames[:6]  # keep the smoke test quick
    geo_path = root / "geometry.json"
    script_path = root / "scenario.json"
    profile_path = root / "profile.csv"
    save_geometry(geometry, geo_path)
    save_scenario(scenario, script_path)
    save_profile(profile, profile_path)

    sim = root / "sim"
    rc = main([
        "simulate", "--geometry", str(geo_path), "--script", str(script_path),
        "--profile", str(profile_path), "--out-dir", str(sim),
    ])
    assert rc == 0

    seg = root / "seg"
    style = scenario.style
    bx = scenario.base_mm[0] / style.mm_per_px
    rc = main([
        "segment", "--frames", str(sim / "frames_manifest.csv"),
        "--vessel-frame", str(sim / "vessel_reference.pgm"),
        "--calibration-mm-per-px", str(style.mm_per_px),
        "--wire-width-px", str(style.wire_width_px),
        "--contact-distance-px", str(style.wire_width_px),
        "--seed-region", f"{bx - 15:.0f},0,{bx + 15:.0f},{style.canvas_px[1]}",
        "--out-dir", str(seg), "--json-log",
    ])
    assert rc == 0

    est = root / "est"
    rc = main([
        "estimate", "--shapes", str(seg / "shapes_manifest.csv"),
        "--profile", str(profile_path), "--free-axial",
        "--radius-mm", "0.8",
        "--out-dir", str(est),
    ])
    assert rc == 0

    rep = root / "rep"
    rc = main([
        "report", "--forces", str(est / "forces.csv"),
        "--frame-times", str(est / "frames.csv"),
        "--geometry", str(geo_path), "--contour-radius-mm", "2.0",
        "--stress", str(est / "stress.csv"),
        "--out-dir", str(rep),
    ])
    assert rc == 0
    return root


class TestPipeline:
    def test_simulate_outputs(self, pipeline_dir):
        sim = pipeline_dir / "sim"
        assert (sim / "vessel_reference.pgm").exists()
        assert (sim / "ground_truth.csv").exists()
        rows = list(csv.reader((sim / "frames_manifest.csv").open()))
        assert rows[0] == ["t_s", "path"]
        assert len(rows) == 7
        assert (sim / rows[1][1]).exists()

    def test_segment_outputs(self, pipeline_dir):
        seg = pipeline_dir / "seg"
        rows = list(csv.reader((seg / "shapes_manifest.csv").open()))
        assert len(rows) == 7
        shape_rows = list(csv.reader((seg / rows[1][1]).open()))
        assert shape_rows[0] == ["s_mm", "x_mm", "y_mm", "is_contact", "is_tip"]

    def test_estimate_outputs(self, pipeline_dir):
        est = pipeline_dir / "est"
        rows = list(csv.reader((est / "forces.csv").open()))
        assert rows[0][:3] == ["t_s", "contact_idx", "s_mm"]
        assert len(rows) > 3
        assert (est / "frames.csv").exists()
        assert (est / "stress.csv").exists()

    def test_estimates_track_ground_truth(self, pipeline_dir):
        truth = {}
        with (pipeline_dir / "sim" / "ground_truth.csv").open() as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                key = (round(float(row["t_s"]), 6))
                mag = np.hypot(float(row["Fx_N"]), float(row["Fy_N"]))
                truth.setdefault(key, []).append((float(row["s_mm"]), mag))
        est = {}
        with (pipeline_dir / "est" / "forces.csv").open() as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                key = round(float(row["t_s"]), 6)
                est.setdefault(key, []).append((float(row["s_mm"]), float(row["Fmag_N"])))
        assert set(truth) == set(est)
        for key in truth:
            assert len(truth[key]) == len(est[key])

    def test_report_outputs(self, pipeline_dir):
        rep = pipeline_dir / "rep"
        for name in ("metrics.csv", "traces.csv", "contour.svg", "stress.svg"):
            assert (rep / name).exists(), name
        header, row = list(csv.reader((rep / "metrics.csv").open()))[:2]
        metrics = dict(zip(header, row))
        assert 0.0 < float(metrics["avg_max_cf_N"]) < 1.0


class TestErrors:
    def test_missing_file_is_input_error(self, tmp_path):
        rc = main([
            "estimate", "--shapes", str(tmp_path / "nope.csv"),
            "--profile", str(tmp_path / "nope2.csv"), "--out-dir", str(tmp_path),
        ])
        assert rc == 1

    def test_bad_profile_is_input_error(self, tmp_path):
        bad = tmp_path / "profile.csv"
        bad.write_text("s_mm,EI_Nmm2\n10,100\n5,50\n")
        shapes = tmp_path / "shapes_manifest.csv"
        shapes.write_text("t_s,path\n")
        rc = main([
            "estimate", "--shapes", str(shapes), "--profile", str(bad),
            "--out-dir", str(tmp_path / "out"),
        ])
        assert rc == 1

    def test_numerical_failure_exit_code(self, tmp_path):
        from lumenforce.phantom import ContactSpec, Scenario, ScenarioFrame, save_scenario

        frames = [ScenarioFrame(t=0.0, wire_length=100.0,
                                contacts=[ContactSpec(s=60.0, deflection=(None, 40.0))])]
        scenario = Scenario(name="hard", base_mm=(20.0, 50.0), frames=frames)
        script = tmp_path / "scenario.json"
        save_scenario(scenario, script)
        rc = main([
            "simulate", "--script", str(script), "--ei", "500",
            "--tol", "1e-15", "--increments", "1",
            "--out-dir", str(tmp_path / "out"),
        ])
        assert rc == 2

    def test_usage_error(self, capsys):
        rc = main(["segment"])  # missing required arguments
        assert rc == 1


class TestRoundtripCommand:
    def test_small_roundtrip_passes(self, tmp_path):
        rc = main(["roundtrip", "--n", "3", "--seed", "5", "--out-dir", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "roundtrip.csv").exists()
