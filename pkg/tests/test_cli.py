import argparse
import subprocess
import sys

import numpy as np
import pytest

from sketchreg import load_csv, ols_fit, save_csv
from sketchreg.cli import main, parse_range

SUBCOMMANDS = ("fit", "bounds", "simulate", "reproduce", "project")


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((30, 6))
    y = x @ np.arange(1.0, 7.0) + 0.1 * rng.standard_normal(30)
    path = tmp_path / "data.csv"
    save_csv(path, x, y)
    return path


@pytest.fixture
def bounds_inputs(tmp_path):
    spec, beta = tmp_path / "spec.csv", tmp_path / "beta.csv"
    spec.write_text("".join(f"{1 / i!r}\n" for i in range(1, 11)))
    beta.write_text("1\n" * 10)
    return spec, beta


def run(*argv):
    return main([str(a) for a in argv])


class TestParseRange:
    def test_forms(self):
        assert parse_range("1..4") == (1, 2, 3, 4)
        assert parse_range("2,5,3") == (2, 5, 3)
        assert parse_range("7") == (7,)

    @pytest.mark.parametrize("bad", ["4..1", "a..b", ""])
    def test_invalid(self, bad):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_range(bad)


class TestFit:
    def test_clse_writes_coefficients(self, data_csv, tmp_path, capsys):
        out = tmp_path / "beta.csv"
        assert run("fit", "--method", "clse", "--d", 4, "--seed", 7, "--input", data_csv, "--output", out) == 0
        assert len(out.read_text().splitlines()) == 6
        meta = (tmp_path / "beta.csv.meta").read_text()
        assert "method=clse" in meta and "seeds=" in meta
        err = capsys.readouterr().err
        assert "seed=7" in err

    def test_ols_matches_library(self, data_csv, tmp_path):
        out = tmp_path / "beta.csv"
        assert run("fit", "--method", "ols", "--no-center", "--input", data_csv, "--output", out) == 0
        x, y = load_csv(data_csv)
        got = np.array([float(v) for v in out.read_text().split()])
        np.testing.assert_array_equal(got, ols_fit(x, y).beta_original)

    @pytest.mark.parametrize("method", ["ridge", "aclse", "row"])
    def test_other_methods(self, data_csv, tmp_path, method):
        out = tmp_path / "beta.csv"
        extra = {"ridge": ["--lambda", 0.5], "aclse": ["--d", 3, "--K", 5], "row": ["--m", 20]}[method]
        assert run("fit", "--method", method, "--input", data_csv, "--output", out, *extra) == 0

    def test_cross_validated_d(self, data_csv, tmp_path):
        out = tmp_path / "beta.csv"
        assert run("fit", "--cv-grid", "1..5", "--folds", 3, "--input", data_csv, "--output", out) == 0
        assert "cv_chosen_d=" in (tmp_path / "beta.csv.meta").read_text()

    def test_missing_input_file(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        assert run("fit", "--d", 2, "--input", missing, "--output", tmp_path / "b.csv") == 1
        assert str(missing) in capsys.readouterr().err

    def test_parse_error_is_runtime_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\nx,3\n")
        assert run("fit", "--method", "ols", "--input", bad, "--output", tmp_path / "b.csv") == 1

    def test_rank_error(self, data_csv, tmp_path):
        assert run("fit", "--d", 9, "--input", data_csv, "--output", tmp_path / "b.csv") == 1

    def test_unknown_flag(self, data_csv, tmp_path):
        assert run("fit", "--bogus", "--input", data_csv, "--output", tmp_path / "b.csv") == 2

    def test_missing_required(self, tmp_path):
        assert run("fit", "--output", tmp_path / "b.csv") == 2

    def test_no_partial_output_on_failure(self, data_csv, tmp_path):
        out = tmp_path / "beta.csv"
        assert run("fit", "--d", 9, "--input", data_csv, "--output", out) == 1
        assert list(tmp_path.iterdir()) == [data_csv]


class TestBounds:
    def test_columns(self, bounds_inputs, tmp_path):
        spec, beta = bounds_inputs
        out = tmp_path / "b.csv"
        assert run("bounds", "--spectrum", spec, "--beta", beta, "--sigma2", 0.025, "--d", "1..5", "--output", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "d,thm1,thm2,thm4,ridge_at_matched_lambda"
        table = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        np.testing.assert_array_equal(table[:, 0], [1, 2, 3, 4, 5])
        assert np.all(table[:, 2] <= table[:, 1])
        assert np.all(table[:, 3] <= table[:, 2])

    def test_d_beyond_p(self, bounds_inputs, tmp_path):
        spec, beta = bounds_inputs
        assert run("bounds", "--spectrum", spec, "--beta", beta, "--sigma2", 0.1, "--d", "1..11",
                   "--output", tmp_path / "b.csv") == 1


class TestProject:
    @pytest.mark.parametrize("role,shape", [("columns", (30, 4)), ("rows", (10, 7))])
    def test_shapes(self, data_csv, tmp_path, role, shape):
        out = tmp_path / "proj.csv"
        d = 3 if role == "columns" else 10
        assert run("project", "--role", role, "--d", d, "--input", data_csv, "--output", out) == 0
        rows = out.read_text().splitlines()
        assert (len(rows), len(rows[0].split(","))) == shape


class TestSimulateAndReproduce:
    def test_simulate(self, tmp_path):
        out = tmp_path / "sim.csv"
        assert run("simulate", "--design", "identity", "--p", 10, "--n", 10, "--sigma2", 0.1, "--d", "2,4",
                   "--M", 200, "--R", 100, "--eta-samples", 500, "--output", out) == 0
        assert out.read_text().startswith("d,empirical_mse,stderr,thm1,thm2,exact")

    def test_reproduce_fig3(self, tmp_path):
        assert run("reproduce", "--figure", "fig3", "--seed", 1, "--M", 300, "--d", "1..3",
                   "--output-dir", tmp_path) == 0
        names = sorted(p.name for p in tmp_path.glob("*.csv"))
        assert names == ["fig3_identity.csv", "fig3_inverse_index.csv", "fig3_spiked.csv"]


class TestConfigAndSeed:
    def test_config_supplies_required_flags(self, data_csv, tmp_path):
        cfg = tmp_path / "run.cfg"
        out = tmp_path / "beta.csv"
        cfg.write_text(f"# manifest\ninput={data_csv}\noutput={out}\nd=3\nseed=5\n")
        assert run("fit", "--config", cfg) == 0
        assert "seeds=5" in (tmp_path / "beta.csv.meta").read_text()

    def test_command_line_overrides_config(self, data_csv, tmp_path):
        cfg = tmp_path / "run.cfg"
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cfg.write_text(f"input={data_csv}\nd=3\nseed=5\n")
        assert run("fit", "--config", cfg, "--output", a, "--seed", 6) == 0
        assert run("fit", "--input", data_csv, "--d", 3, "--output", b, "--seed", 6) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_config_key(self, data_csv, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("colour=blue\n")
        assert run("fit", "--config", cfg, "--input", data_csv, "--output", tmp_path / "b.csv") == 2

    def test_environment_seed(self, data_csv, tmp_path, monkeypatch):
        monkeypatch.setenv("SKETCHREG_SEED", "11")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run("fit", "--d", 3, "--input", data_csv, "--output", a) == 0
        assert run("fit", "--d", 3, "--seed", 11, "--input", data_csv, "--output", b) == 0
        assert a.read_bytes() == b.read_bytes()
        assert run("fit", "--d", 3, "--seed", 12, "--input", data_csv, "--output", b) == 0
        assert a.read_bytes() != b.read_bytes()


class TestHelp:
    @pytest.mark.parametrize("command", SUBCOMMANDS)
    def test_every_flag_documented(self, command, capsys):
        assert run(command, "--help") == 0
        text = capsys.readouterr().out
        for flag in ("--seed", "--config", "--threads"):
            assert flag in text
        from sketchreg.cli import build_parser, _subparser

        for action in _subparser(build_parser(), command)._actions:
            if action.option_strings and action.dest != "help":
                assert action.help, f"{command} {action.option_strings} lacks help"

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "sketchreg", "--help"], capture_output=True, text=True)
        assert res.returncode == 0
        for command in SUBCOMMANDS:
            assert command in res.stdout


@pytest.mark.parametrize("argv", [
    ["fit", "--method", "aclse", "--d", "3", "--K", "12"],
    ["simulate", "--design", "inverse_index", "--p", "8", "--n", "8", "--method", "aclse", "--d", "2,4",
     "--K", "5", "--R", "100", "--replicates", "20", "--eta-samples", "300"],
])
def test_threads_do_not_change_output(data_csv, tmp_path, argv):
    outs = []
    for threads in (1, 4, 1):
        out = tmp_path / f"out{len(outs)}.csv"
        extra = ["--input", data_csv] if argv[0] == "fit" else []
        assert run(*argv, *extra, "--seed", 3, "--threads", threads, "--output", out) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
