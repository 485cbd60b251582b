"""Configuration layering, CSV/PGM round trips, and .hp model files."""

import csv
import os

import numpy as np
import pytest

from hpshield.config import Config, ConfigError, env_var_name, parse_config_text
from hpshield.io_utils import (
    atomic_write_text,
    read_pgm,
    trace_to_csv,
    write_csv,
    write_pgm,
)
from hpshield.interp import RandomResolver, run
from hpshield.modelfile import (
    ModelFileError,
    guard_table_to_program,
    model_to_text,
    parse_model,
)
from hpshield import carmodel
from hpshield.parser import parse_program
from hpshield.shield import extract_guards


class TestConfig:
    def test_parse_and_comments(self):
        values = parse_config_text(
            "# comment\n// also comment\n\ntrain.alpha = 0.5\nenv.name=car\n"
        )
        assert values == {"train.alpha": "0.5", "env.name": "car"}

    def test_bad_line_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("not a key value pair")

    def test_precedence(self):
        cfg = Config(
            file_values={"k": "file"},
            overrides={"k": "override"},
            environ={env_var_name("k"): "env"},
        )
        assert cfg.get_str("k") == "override"
        cfg2 = Config(file_values={"k": "file"}, environ={env_var_name("k"): "env"})
        assert cfg2.get_str("k") == "env"
        cfg3 = Config(file_values={"k": "file"}, environ={})
        assert cfg3.get_str("k") == "file"
        cfg4 = Config(environ={})
        assert cfg4.get_str("k", "default") == "default"

    def test_env_var_name_mapping(self):
        assert env_var_name("train.alpha") == "HPSHIELD_TRAIN_ALPHA"
        assert env_var_name("check.memo-vars") == "HPSHIELD_CHECK_MEMO_VARS"

    def test_typed_accessors(self):
        cfg = Config(file_values={"f": "2.5", "i": "7", "b": "true", "l": "1,2,3"},
                     environ={})
        assert cfg.get_float("f") == 2.5
        assert cfg.get_int("i") == 7
        assert cfg.get_bool("b") is True
        assert cfg.get_floats("l") == [1.0, 2.0, 3.0]

    def test_type_errors(self):
        cfg = Config(file_values={"f": "abc"}, environ={})
        with pytest.raises(ConfigError):
            cfg.get_float("f")

    def test_range_grid(self):
        cfg = Config(file_values={"g": "0:90:10", "l": "1,2.5"}, environ={})
        assert cfg.get_range("g") == [0.0, 10.0, 20.0, 30.0, 40.0, 50.0,
                                      60.0, 70.0, 80.0, 90.0]
        assert cfg.get_range("l") == [1.0, 2.5]

    def test_keys_with_prefix(self):
        cfg = Config(file_values={"grid.x": "1", "grid.v": "2", "other": "3"},
                     overrides={"grid.t": "4"}, environ={})
        assert cfg.keys_with_prefix("grid.") == ["grid.t", "grid.v", "grid.x"]


class TestCSV:
    def test_write_and_read_back(self, tmp_path):
        path = str(tmp_path / "data.csv")
        write_csv(path, ["a", "b"], [[1, 2], [3, 4]])
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows == [["a", "b"], ["1", "2"], ["3", "4"]]

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        path = str(tmp_path / "out.txt")
        atomic_write_text(path, "hello")
        assert os.listdir(tmp_path) == ["out.txt"]

    def test_trace_csv_columns(self, tmp_path):
        p = parse_program("x := 1; {x' = 1}")
        _, trace = run(p, {"x": 0.0}, RandomResolver(seed=0, max_dwell=0.5))
        path = str(tmp_path / "trace.csv")
        trace_to_csv(trace, path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["time", "event_kind", "x"]
        assert rows[1][1] == "discrete"
        assert rows[2][1] == "continuous"
        # cumulative time is monotone
        times = [float(r[0]) for r in rows[1:]]
        assert times == sorted(times)


class TestPGM:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        frame = rng.uniform(0, 1, (12, 16))
        path = str(tmp_path / "frame.pgm")
        write_pgm(path, frame)
        back = read_pgm(path)
        assert back.shape == frame.shape
        assert np.abs(back - frame).max() <= 0.5 / 255 + 1e-9

    def test_binary_p5_header(self, tmp_path):
        path = str(tmp_path / "f.pgm")
        write_pgm(path, np.zeros((2, 3)))
        with open(path, "rb") as fh:
            assert fh.read(2) == b"P5"

    def test_rejects_non_2d(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm(str(tmp_path / "f.pgm"), np.zeros((2, 2, 3)))


class TestModelFile:
    def test_parse_sections(self):
        m = parse_model(carmodel.model_text())
        assert m.init == carmodel.init_formula()
        assert m.safe == carmodel.safe_formula()
        assert m.program == carmodel.loop_body()

    def test_round_trip(self):
        m = parse_model(carmodel.model_text())
        assert parse_model(model_to_text(m)) == m

    def test_missing_section(self):
        with pytest.raises(ModelFileError):
            parse_model("init: x <= 1\nsafe: x <= 1\n")

    def test_duplicate_section(self):
        with pytest.raises(ModelFileError):
            parse_model("init: true\ninit: true\nprogram: x := 1\nsafe: true\n")

    def test_guard_table_to_program_re_extracts(self):
        table = carmodel.guard_table()
        prog = guard_table_to_program(table)
        again = extract_guards(prog, table.fallback, labels=table.actions)
        assert again.entries == table.entries
