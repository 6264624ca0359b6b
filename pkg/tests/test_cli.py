import json

import pytest

from dfst.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from dfst.synth import SynthSpec, synth_sequence, write_sequence


@pytest.fixture()
def synth_spec_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(
        json.dumps(
            {
                "width": 200,
                "height": 150,
                "num_frames": 5,
                "target_size": [28, 28],
                "target_color": [230, 120, 40],
                "start": [100.0, 75.0],
                "velocity": [2.0, 0.0],
                "texture_amount": 0.3,
                "texture_cell": 12,
                "seed": 5,
            }
        )
    )
    return path


class TestSynthCommand:
    def test_writes_sequence(self, synth_spec_file, tmp_path, capsys):
        out_dir = tmp_path / "seq"
        assert main(["synth", "--spec", str(synth_spec_file), "--out", str(out_dir)]) == EXIT_OK
        assert (out_dir / "groundtruth.txt").exists()
        assert len(list(out_dir.glob("*.png"))) == 5

    def test_missing_spec_is_data_error(self, tmp_path):
        code = main(["synth", "--spec", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
        assert code == EXIT_DATA


class TestRunCommand:
    def test_synthetic_run_produces_outputs(self, synth_spec_file, tmp_path):
        out = tmp_path / "out"
        code = main(
            [
                "run",
                "--synthetic",
                str(synth_spec_file),
                "--output",
                str(out),
                "--dump-ranking",
                "--set",
                "scale_adapt=false",
            ]
        )
        assert code == EXIT_OK
        assert (out / "results.txt").exists()
        assert (out / "ranking.csv").exists()
        report = json.loads((out / "report.json").read_text())
        assert 0.0 <= report["mean_iou"] <= 1.0
        assert report["config_snapshot"]["scale_adapt"] is False

    def test_sequence_directory_run_with_render(self, tmp_path):
        seq_dir = tmp_path / "seq"
        write_sequence(
            synth_sequence(
                SynthSpec(
                    width=200,
                    height=150,
                    num_frames=4,
                    target_size=(28, 28),
                    target_color=(230, 120, 40),
                    start=(100.0, 75.0),
                    texture_amount=0.3,
                    texture_cell=12,
                    seed=5,
                )
            ),
            seq_dir,
        )
        out = tmp_path / "out"
        code = main(
            ["run", "--sequence", str(seq_dir), "--output", str(out), "--render",
             "--set", "scale_adapt=false"]
        )
        assert code == EXIT_OK
        assert len(list((out / "overlay").glob("*.png"))) == 4

    def test_requires_exactly_one_source(self, synth_spec_file, tmp_path):
        assert main(["run", "--output", str(tmp_path)]) == EXIT_USAGE
        seq_dir = tmp_path / "missing"
        code = main(
            ["run", "--sequence", str(seq_dir), "--synthetic", str(synth_spec_file)]
        )
        assert code == EXIT_USAGE

    def test_missing_sequence_is_data_error(self, tmp_path):
        assert main(["run", "--sequence", str(tmp_path / "none")]) == EXIT_DATA

    def test_bad_config_override_is_data_error(self, synth_spec_file, tmp_path):
        code = main(
            ["run", "--synthetic", str(synth_spec_file), "--output", str(tmp_path / "o"),
             "--set", "lambda_reg=1e-9"]
        )
        assert code == EXIT_DATA


class TestMetricsCommand:
    def test_round_trip_scoring(self, tmp_path, capsys):
        results = tmp_path / "results.txt"
        gt = tmp_path / "groundtruth.txt"
        results.write_text("10,10,20,20\n10,10,20,20\n12,10,20,20\n")
        gt.write_text("10,10,20,20\n10,10,20,20\n10,10,20,20\n")
        assert main(["metrics", "--results", str(results), "--groundtruth", str(gt)]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data["frames_evaluated"] == 2
        assert 0.0 < data["mean_iou"] <= 1.0

    def test_missing_results_file(self, tmp_path):
        gt = tmp_path / "gt.txt"
        gt.write_text("0,0,2,2\n")
        code = main(["metrics", "--results", str(tmp_path / "nope.txt"), "--groundtruth", str(gt)])
        assert code == EXIT_DATA


class TestUsageErrors:
    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_missing_required_flag(self):
        assert main(["synth", "--out", "somewhere"]) == EXIT_USAGE

    def test_bad_set_syntax(self, synth_spec_file):
        assert main(["run", "--synthetic", str(synth_spec_file), "--set", "oops"]) == EXIT_USAGE
