"""CLI integration tests: exit codes, output files, and reproducibility."""

import csv
import os

import pytest

from hpshield import carmodel
from hpshield.cli import main

MODEL_DIR = os.path.join(os.path.dirname(__file__), "..", "models")
CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


@pytest.fixture
def stopsign(tmp_path):
    path = str(tmp_path / "stopsign.hp")
    with open(path, "w") as fh:
        fh.write(carmodel.model_text())
    return path


@pytest.fixture
def stopsign_weak(tmp_path):
    path = str(tmp_path / "weak.hp")
    with open(path, "w") as fh:
        fh.write(carmodel.model_text(weak=True))
    return path


def _check_args(model, out, depth="6"):
    return [
        "check", model, "--out", out,
        "--set", "grid.x=0:90:30", "--set", "grid.v=0:4:2",
        "--set", "const.A=1", "--set", "const.b=1", "--set", "const.eps=1",
        "--set", "const.m=100", "--set", "const.t=0", "--set", "const.a=0",
        "--set", f"check.depth={depth}", "--set", "check.dwell=0.5,1.0",
        "--set", "check.ode_step=0.25", "--set", "check.memo_vars=x,v",
        "--set", "report.figures=false",
    ]


class TestCheck:
    def test_safe_model_exits_zero(self, stopsign, tmp_path):
        out = str(tmp_path / "out")
        assert main(_check_args(stopsign, out)) == 0
        with open(os.path.join(out, "check_summary.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["verdict"] == "no_counterexample"

    def test_weak_model_exits_one_with_trace(self, stopsign_weak, tmp_path):
        out = str(tmp_path / "out")
        assert main(_check_args(stopsign_weak, out, depth="20")) == 1
        assert os.path.exists(os.path.join(out, "counterexample.csv"))
        with open(os.path.join(out, "check_summary.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["verdict"] == "counterexample"

    def test_missing_model_exits_two(self, tmp_path):
        assert main(["check", str(tmp_path / "nope.hp"), "--out", str(tmp_path)]) == 2

    def test_malformed_model_exits_two(self, tmp_path):
        bad = str(tmp_path / "bad.hp")
        with open(bad, "w") as fh:
            fh.write("init: x <=\nprogram: x := 1\nsafe: true\n")
        assert main(["check", bad, "--out", str(tmp_path)]) == 2

    def test_missing_grid_exits_two(self, stopsign, tmp_path):
        assert main(["check", stopsign, "--out", str(tmp_path)]) == 2


class TestSimulate:
    def _args(self, model, out, seed="5"):
        return [
            "simulate", model, "--out", out, "--seed", seed,
            "--set", "const.x=0", "--set", "const.v=0", "--set", "const.A=1",
            "--set", "const.b=1", "--set", "const.eps=1", "--set", "const.m=100",
            "--set", "const.t=0", "--set", "const.a=0",
            "--set", "report.figures=false",
        ]

    def test_writes_trace(self, stopsign, tmp_path):
        out = str(tmp_path / "sim")
        assert main(self._args(stopsign, out)) == 0
        with open(os.path.join(out, "trace.csv")) as fh:
            header = next(csv.reader(fh))
        assert header[:2] == ["time", "event_kind"]

    def test_bit_reproducible(self, stopsign, tmp_path):
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        assert main(self._args(stopsign, out_a)) == 0
        assert main(self._args(stopsign, out_b)) == 0
        with open(os.path.join(out_a, "trace.csv"), "rb") as fh:
            a = fh.read()
        with open(os.path.join(out_b, "trace.csv"), "rb") as fh:
            b = fh.read()
        assert a == b

    def test_invalid_initial_state_exits_two(self, stopsign, tmp_path):
        args = self._args(stopsign, str(tmp_path / "sim"))
        args[args.index("const.v=0")] = "const.v=100"  # violates the init formula
        assert main(args) == 2


class TestTrain:
    def _args(self, out, extra=()):
        return [
            "train", "--out", out,
            "--set", "env.name=car", "--set", "train.episodes=40",
            "--set", "eval.episodes=3", "--set", "report.figures=false",
            *extra,
        ]

    def test_writes_logs(self, tmp_path):
        out = str(tmp_path / "train")
        assert main(self._args(out)) == 0
        with open(os.path.join(out, "training_log.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 40
        assert set(rows[0]) == {"episode", "reward", "violations", "interventions",
                                "steps", "epsilon", "wall_time"}
        assert all(r["violations"] == "0" for r in rows)

    def test_bit_reproducible_modulo_wall_time(self, tmp_path):
        def stable_columns(out):
            with open(os.path.join(out, "training_log.csv")) as fh:
                return [
                    {k: v for k, v in row.items() if k != "wall_time"}
                    for row in csv.DictReader(fh)
                ]

        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(self._args(out_a)) == 0
        assert main(self._args(out_b)) == 0
        assert stable_columns(out_a) == stable_columns(out_b)

    def test_crossing_emits_frames(self, tmp_path):
        out = str(tmp_path / "cross")
        args = [
            "train", "--out", out,
            "--set", "env.name=crossing", "--set", "train.episodes=5",
            "--set", "eval.episodes=2", "--set", "report.figures=false",
        ]
        assert main(args) == 0
        assert os.path.exists(os.path.join(out, "frame_000.pgm"))

    def test_unknown_env_exits_two(self, tmp_path):
        assert main(self._args(str(tmp_path), ("--set", "env.name=pong"))) == 2


class TestPenaltySweep:
    def test_sweep_csv(self, tmp_path):
        out = str(tmp_path / "sweep")
        args = [
            "penalty-sweep", "--out", out,
            "--set", "env.name=car", "--set", "train.episodes=30",
            "--set", "eval.episodes=2", "--set", "sweep.penalties=0,-5",
            "--set", "report.figures=false",
        ]
        assert main(args) == 0
        with open(os.path.join(out, "penalty_sweep.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["penalty"] for r in rows] == ["0.0", "-5.0"]

    def test_positive_penalty_exits_two(self, tmp_path):
        args = ["penalty-sweep", "--out", str(tmp_path),
                "--set", "sweep.penalties=1"]
        assert main(args) == 2


class TestAdapt:
    def test_full_pipeline(self, tmp_path):
        out = str(tmp_path / "adapt")
        args = [
            "adapt", "--out", out,
            "--config", os.path.join(CONFIG_DIR, "adapt_car.conf"),
            "--set", "adapt.episodes_per_phase=40",
            "--set", "report.figures=false",
        ]
        assert main(args) == 0
        with open(os.path.join(out, "adapt_summary.csv")) as fh:
            row = next(csv.DictReader(fh))
        assert row["mismatch"] == "1"
        assert 0.45 <= float(row["fitted_brake_max"]) <= 0.55
        assert int(row["violations_stale"]) >= 1
        assert int(row["violations_adapted"]) == 0

    def test_figures_rendered_by_default(self, tmp_path):
        out = str(tmp_path / "adapt")
        args = [
            "adapt", "--out", out,
            "--config", os.path.join(CONFIG_DIR, "adapt_car.conf"),
            "--set", "adapt.episodes_per_phase=15",
        ]
        assert main(args) == 0
        assert os.path.exists(os.path.join(out, "adaptation.png"))
