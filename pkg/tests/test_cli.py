"""
Tester för lab_cli: kommandon körs via main() mot tmp-kataloger och
exit-koderna kontrolleras.
"""
import json
import math

import pytest

from cli import lab_cli
from filaments.file_store import load_field_3d, load_green


def write_exp(tmp_path, payload, name: str = "exp.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def read(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestMinimize:
    def test_single_straight_filament(self, tmp_path):
        cfg = write_exp(tmp_path, {"bottom": [[0.1, 0.0]], "top": [[0.3, 0.2]], "height": 1.5, "z_nodes": 9})
        out = tmp_path / "out"
        assert lab_cli.main(["--config", cfg, "--out", str(out), "minimize"]) == 0
        energy = read(out / "energy.json")
        assert energy["G0"] == pytest.approx(math.pi * 0.08 / 3.0, rel=1e-9)
        assert energy["iterations"] == 0
        assert energy["min_interior_separation"] == "inf"
        assert (out / "minimizer.csv").exists()

    def test_pair_is_deterministic(self, tmp_path):
        cfg = write_exp(
            tmp_path,
            {
                "bottom": [[0.3, 0.0], [-0.3, 0.0]],
                "top": [[0.0, 0.3], [0.0, -0.3]],
                "height": 1.0,
                "z_nodes": 9,
                "seed": 5,
            },
        )
        for name in ("a", "b"):
            assert lab_cli.main(["--config", cfg, "--out", str(tmp_path / name), "minimize"]) == 0
        for artifact in ("energy.json", "minimizer.csv"):
            assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()
        energy = read(tmp_path / "a" / "energy.json")
        assert "min_eigenvalue" in energy["local_min"]
        assert energy["seed"] == 5

    def test_without_endpoints(self, tmp_path):
        cfg = write_exp(tmp_path, {"height": 1.0})
        out = tmp_path / "out"
        assert lab_cli.main(["--config", cfg, "--out", str(out), "minimize"]) == 1
        assert read(out / "error.json")["code"] == "VALIDATION_ERROR"


class TestPlantAndDetect:
    def test_planted_vortices_are_found(self, tmp_path):
        points = [[0.305, 0.01], [-0.155, 0.26]]
        cfg = write_exp(tmp_path, {"vortices": points, "epsilon": 0.05, "n": 2})
        out = tmp_path / "out"
        assert lab_cli.main(["--config", cfg, "--out", str(out), "plant"]) == 0
        manifest = read(out / "field.json")
        assert manifest["meta"]["vortices"] == points

        assert lab_cli.main(["--config", cfg, "--out", str(out), "detect", "--field", str(out / "field.csv")]) == 0
        summary = read(out / "detect_summary.json")
        assert summary["atoms"] == 2
        assert summary["total_weight"] == pytest.approx(2.0 * math.pi)
        balls = read(out / "balls.json")
        assert balls["total_degree"] == 2
        assert balls["certificate"]["lower_bound"] <= balls["certificate"]["covered_energy"]
        assert (out / "atoms.csv").exists()

    def test_plant_needs_epsilon(self, tmp_path):
        cfg = write_exp(tmp_path, {"vortices": [[0.1, 0.0]]})
        assert lab_cli.main(["--config", cfg, "--out", str(tmp_path / "out"), "plant"]) == 1

    def test_missing_field_exits_5(self, tmp_path):
        cfg = write_exp(tmp_path, {})
        out = tmp_path / "out"
        code = lab_cli.main(["--config", cfg, "--out", str(out), "detect", "--field", str(tmp_path / "saknas.csv")])
        assert code == 5
        assert read(out / "error.json")["code"] == "IO_ERROR"

    def test_detect_needs_a_field(self, tmp_path):
        cfg = write_exp(tmp_path, {})
        assert lab_cli.main(["--config", cfg, "--out", str(tmp_path / "out"), "detect"]) == 1


class TestConstants:
    def test_disk_constants(self, tmp_path):
        cfg = write_exp(tmp_path, {"n": 3, "height": 2.0, "gamma_epsilons": [0.04, 0.02, 0.01]})
        out = tmp_path / "out"
        assert lab_cli.main(["--config", cfg, "--out", str(out), "constants"]) == 0
        data = read(out / "constants.json")
        assert data["H00"] == 0.0
        assert data["gamma_estimate"] > 0.0
        assert data["kappa_n"] == pytest.approx(3 * 2.0 * data["gamma_estimate"])
        assert len(data["trace"]) == 3
        assert data["green_file"] is None
        assert not (out / "green_h00.csv").exists()

    def test_rectangle_writes_green_dump(self, tmp_path):
        cfg = write_exp(
            tmp_path,
            {
                "domain": {"shape": "rectangle", "half_widths": [0.5, 0.5]},
                "n": 2,
                "height": 1.0,
                "gamma_epsilons": [0.04, 0.02, 0.01],
            },
        )
        out = tmp_path / "out"
        assert lab_cli.main(["--config", cfg, "--out", str(out), "constants"]) == 0
        data = read(out / "constants.json")
        assert data["green_file"] == str(out / "green_h00.csv")
        green = load_green(out / "green_h00.csv")
        assert green.y == (0.0, 0.0)
        assert float(green.at([0.0, 0.0])[0]) == pytest.approx(data["H00"], abs=1e-9)
        assert data["H00"] > 0.0


class TestFailures:
    def test_invalid_config_exits_1(self, tmp_path):
        cfg = write_exp(tmp_path, {"domain": {"shape": "hexagon"}})
        out = tmp_path / "out"
        assert lab_cli.main(["--config", cfg, "--out", str(out), "constants"]) == 1
        assert read(out / "error.json")["code"] == "CONFIG_ERROR"

    def test_bad_thread_count(self, tmp_path):
        assert lab_cli.main(["--threads", "0", "--out", str(tmp_path), "constants"]) == 1

    def test_runs_are_logged(self, tmp_path, isolated_run_log):
        cfg = write_exp(tmp_path, {"domain": {"shape": "hexagon"}})
        lab_cli.main(["--config", cfg, "--out", str(tmp_path / "out"), "--seed", "9", "constants"])
        records = [json.loads(line) for line in isolated_run_log.read_text(encoding="utf-8").splitlines()]
        record = records[-1]
        assert record["command"] == "constants"
        assert record["success"] is False
        assert record["error_type"] == "ConfigurationError"
        assert record["seed"] == 9


@pytest.mark.slow
class TestGammaSweep:
    def test_report_is_written(self, tmp_path):
        cfg = write_exp(
            tmp_path,
            {
                "bottom": [[0.3, 0.0], [-0.3, 0.0]],
                "height": 1.0,
                "z_nodes": 9,
                "epsilons": [0.05, 0.025],
                "gamma_epsilons": [0.04, 0.02, 0.01],
                "z_samples": 3,
            },
        )
        out = tmp_path / "out"
        code = lab_cli.main(["--config", cfg, "--out", str(out), "gamma-sweep"])
        assert code in (0, 4)
        report = read(out / "report.json")
        assert report["epsilons"] == [0.05, 0.025]
        assert (out / "report.csv").exists()


class TestDumpFields:
    """Små ε och raka filament så att svepet går snabbt."""

    def sweep_config(self, tmp_path) -> str:
        return write_exp(
            tmp_path,
            {
                "bottom": [[0.5, 0.0], [-0.5, 0.0]],
                "height": 1.0,
                "z_nodes": 5,
                "epsilons": [0.1, 0.05],
                "gamma_epsilons": [0.04, 0.02, 0.01],
                "z_samples": 3,
            },
        )

    def test_fields_are_saved_per_epsilon(self, tmp_path):
        out = tmp_path / "out"
        code = lab_cli.main(["--config", self.sweep_config(tmp_path), "--out", str(out), "gamma-sweep", "--dump-fields"])
        assert code in (0, 4)
        records = read(out / "report.json")["records"]
        assert [r["epsilon"] for r in records] == [0.1, 0.05]
        for rec in records:
            u = load_field_3d(out / "fields" / f"eps_{rec['epsilon']:.6g}")
            assert u.eps == pytest.approx(rec["epsilon"])
            assert u.values.shape[0] == 3
            assert u.meta["h_eps"] == pytest.approx(rec["h_eps"])

    def test_no_fields_without_flag(self, tmp_path):
        out = tmp_path / "out"
        code = lab_cli.main(["--config", self.sweep_config(tmp_path), "--out", str(out), "gamma-sweep"])
        assert code in (0, 4)
        assert (out / "report.json").exists()
        assert not (out / "fields").exists()
