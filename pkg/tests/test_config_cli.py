import csv
import json
import math

import pytest

from nnball import IsotropicGaussian, PowerCdf1D, Uniform1D, UniformSquare2D
from nnball.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, all_schedule, main
from nnball.config import (
    ConfigError,
    build_config,
    config_hash,
    config_to_dict,
    model_spec,
    parse_config,
    parse_model,
)


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- config ---------------------------------------------------------------------

def test_minimal_config_fills_defaults(tmp_path):
    c = parse_config(write(tmp_path, 'experiment = "gumbel"\nmodel = "uniform1d"\nn_values = [256]\nseed = 42\n'))
    assert c.n_values == (256,) and c.seed == 42
    assert c.trials == 2000
    assert c.y_grid == (-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0)
    assert c.delta == 0.05
    assert c.model == Uniform1D()


@pytest.mark.parametrize("raw, key", [
    ({"n_values": [1]}, "n must be >= 2"),
    ({"trials": 0}, "trials"),
    ({"trails": 10}, "trails"),
    ({"model": "cauchy"}, "model"),
    ({"model": "power1d:theta=x"}, "model.theta"),
    ({"model": {"name": "power1d", "beta": 2}}, "model.beta"),
    ({"thresholds": {"kss": 0.1}}, "thresholds.kss"),
    ({"conditions": {"delta": 1.5}}, "conditions.delta"),
    ({"conditions": {"cone_a": [0.0]}}, "conditions.cone_a"),
    ({"seed": -3}, "seed"),
    ({"n_values": [64.5]}, "n_values"),
    ({"y_grid": []}, "y_grid"),
    ({"mode": "weird"}, "mode"),
    ({"experiment": "bogus"}, "experiment"),
    ({"k_max": 9}, "k_max"),
])
def test_invalid_values_name_the_key(raw, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        build_config(raw)


def test_malformed_and_missing_files(tmp_path):
    with pytest.raises(ConfigError, match="malformed"):
        parse_config(write(tmp_path, "experiment = \n"))
    with pytest.raises(ConfigError, match="no such file"):
        parse_config(str(tmp_path / "absent.toml"))


def test_model_specs_roundtrip():
    for m in (Uniform1D(), Uniform1D(-1.0, 2.5), PowerCdf1D(2.0), UniformSquare2D(), IsotropicGaussian(3, 0.5)):
        assert parse_model(model_spec(m)) == m
    assert parse_model({"name": "gaussian", "d": 2, "sigma": 1.5}) == IsotropicGaussian(2, 1.5)
    assert parse_model("Power1D: theta = 3") == PowerCdf1D(3.0)


def test_poissonized_defaults_and_aliases():
    c = build_config({"experiment": "poissonized-tail", "n_values": [100.5]})
    assert c.mode == "poissonized" and c.n_values == (100.5,)
    assert build_config({"experiment": "moments"}).experiment == "factorial_moments"


def test_config_dict_roundtrip_and_hash():
    c = build_config({"experiment": "conditions", "model": "power1d:theta=3",
                      "conditions": {"delta": 0.1, "cone_a": [0.2], "trials": 500, "gamma_d": 3.0}})
    d = config_to_dict(c)
    assert build_config({k: v for k, v in d.items()}) == c
    h = config_hash(d)
    assert h == config_hash(json.loads(json.dumps(d)))
    assert h == config_hash(dict(d, threads=17))
    assert h != config_hash(dict(d, seed=d["seed"] + 1))
    assert len(h) == 64


# -- CLI ------------------------------------------------------------------------

def test_tail_bound_example(tmp_path, capsys):
    out = tmp_path / "a"
    code = main(["tail-bound", "--seed", "7", "--n", "256", "--trials", "5000", "--out", str(out), "-q"])
    assert code == EXIT_OK
    rows = read_csv(out / "report.csv")
    assert [float(r["y"]) for r in rows] == [-2, -1, 0, 1, 2, 3, 4]
    assert all(r["n"] == "256" and r["experiment"] == "tail_bound" for r in rows)
    summary = json.loads((out / "summary.json").read_text())
    manifest = json.loads((out / "manifest.json").read_text())
    assert summary["pass"] is True and summary["exit_code"] == 0
    assert manifest["seed"] == 7
    assert manifest["effective_config"]["trials"] == 5000
    assert manifest["config_hash"] == config_hash(manifest["effective_config"])
    for key in ("version", "started", "finished", "outputs", "backend"):
        assert key in manifest

    again = tmp_path / "b"
    assert main(["tail-bound", "--seed", "7", "--n", "256", "--trials", "5000", "--out", str(again),
                 "--threads", "1", "-q"]) == EXIT_OK
    assert (out / "report.csv").read_bytes() == (again / "report.csv").read_bytes()
    assert json.loads((again / "manifest.json").read_text())["config_hash"] == manifest["config_hash"]


def test_unknown_subcommand_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_bad_flag_values_exit_1(tmp_path):
    for argv in (["gumbel", "--trials", "0"], ["gumbel", "--seed", "-1"], ["gumbel", "--n", "a,b"]):
        with pytest.raises(SystemExit) as exc:
            main(argv + ["--out", str(tmp_path)])
        assert exc.value.code == EXIT_USAGE


def test_bad_config_exits_1(tmp_path, capsys):
    path = write(tmp_path, 'model = "uniform1d"\nn_values = [1]\n')
    assert main(["gumbel", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "n must be >= 2" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()
    assert main(["gumbel", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == EXIT_USAGE


def test_failing_check_exits_2(tmp_path):
    path = write(tmp_path, "[thresholds]\nks = 0.0\n")
    out = tmp_path / "o"
    code = main(["gumbel", "--config", path, "--n", "64", "--trials", "100", "--out", str(out), "-q"])
    assert code == EXIT_FAIL
    summary = json.loads((out / "summary.json").read_text())
    assert summary["pass"] is False and summary["exit_code"] == EXIT_FAIL
    assert any(r["pass"] == "false" for r in read_csv(out / "report.csv"))


def test_overrides_beat_config_file(tmp_path):
    path = write(tmp_path, 'model = "power1d:theta=2"\nn_values = [512]\ntrials = 50\nseed = 1\ny_grid = [0, 1]\n')
    out = tmp_path / "o"
    assert main(["tail-bound", "--config", path, "--n", "64", "--seed", "9", "--out", str(out), "-q"]) == EXIT_OK
    eff = json.loads((out / "manifest.json").read_text())["effective_config"]
    assert eff["n_values"] == [64] and eff["seed"] == 9
    assert eff["trials"] == 50 and eff["model"] == "power1d:theta=2.0" and eff["y_grid"] == [0.0, 1.0]
    rows = read_csv(out / "report.csv")
    assert {r["n"] for r in rows} == {"64"} and {r["model"] for r in rows} == {PowerCdf1D(2.0).label}


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NNBALL_OUT", str(tmp_path / "env"))
    assert main(["pit", "--model", "uniform1d", "-q"]) == EXIT_OK
    assert (tmp_path / "env" / "report.csv").exists()


def test_all_rejects_per_run_flags(tmp_path):
    for flag in (["--n", "64"], ["--model", "uniform1d"], ["--y", "0"]):
        assert main(["all", "--out", str(tmp_path)] + flag) == EXIT_USAGE


def test_all_schedule_is_fixed():
    a = all_schedule(5)
    b = all_schedule(5, threads=4)
    assert [c.replace(threads=1) for c, _ in a] == [c.replace(threads=1) for c, _ in b]
    assert len({c.seed for c, _ in a}) == len(a)
    tails = [c for c, _ in a if c.experiment == "tail_bound"]
    assert len(tails) == 4 and all(c.trials == 5000 and c.n_values == (64, 256, 1024) for c in tails)
    assert math.isclose(sum(len(c.n_values) * len(c.y_grid) for c in tails), 60)
