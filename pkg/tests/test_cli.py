"""Command-line interface tests, run in-process through main(argv)."""

import json

import pytest

from stablebo.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_PROTOCOL, main
from stablebo.bench import synthetic_config


@pytest.fixture()
def config_path(tmp_path):
    blob = synthetic_config("ucbsg", seed=7, budget=3).to_json()
    blob["acq_opt"]["grid_resolution"] = 201
    blob["mc"]["n_samples"] = 200
    path = tmp_path / "config.json"
    path.write_text(json.dumps(blob))
    return str(path)


def test_plan_happy_path(config_path, capsys):
    assert main(["plan", "--config", config_path]) == EXIT_OK
    out = capsys.readouterr().out
    assert "p_min" in out and "eps" in out and "F " in out


def test_plan_rejects_large_b(tmp_path, capsys):
    blob = synthetic_config().to_json()
    blob["stability"]["B"] = 0.2
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(blob))
    assert main(["plan", "--config", str(path)]) == EXIT_CONFIG
    assert "length-scale" in capsys.readouterr().err


def test_plan_missing_g(tmp_path, capsys):
    blob = synthetic_config().to_json()
    del blob["stability"]["G"]
    path = tmp_path / "nog.json"
    path.write_text(json.dumps(blob))
    assert main(["plan", "--config", str(path)]) == EXIT_CONFIG
    assert "G" in capsys.readouterr().err


def test_plan_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["plan", "--config", str(path)]) == EXIT_CONFIG


def test_run_deterministic_bytes(config_path, tmp_path, capsys):
    out1, out2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    assert main(["run", "--config", config_path, "--objective", "synthetic1d",
                 "--out", str(out1)]) == EXIT_OK
    assert main(["run", "--config", config_path, "--objective", "synthetic1d",
                 "--out", str(out2)]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    payload = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    assert "recommendation" in payload


def test_run_unknown_objective(config_path, tmp_path):
    assert main(["run", "--config", config_path, "--objective", "nonesuch",
                 "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_session_happy_path(config_path, tmp_path, capsys):
    session = str(tmp_path / "s.json")
    assert main(["session", "new", "--session", session, "--config", config_path]) == EXIT_OK
    assert main(["session", "suggest", "--session", session]) == EXIT_OK
    x = json.loads(capsys.readouterr().out.strip().split("\n")[-1])["x"][0]
    assert main(["session", "tell", "--session", session, "--x", str(x), "--y", "1.2"]) == EXIT_OK
    assert main(["session", "recommend", "--session", session]) == EXIT_OK
    rec = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    assert rec["x_star"][0] == pytest.approx(x)
    assert main(["session", "status", "--session", session]) == EXIT_OK


def test_session_suggest_twice_protocol_error(config_path, tmp_path):
    session = str(tmp_path / "s.json")
    main(["session", "new", "--session", session, "--config", config_path])
    assert main(["session", "suggest", "--session", session]) == EXIT_OK
    assert main(["session", "suggest", "--session", session]) == EXIT_PROTOCOL


def test_session_tell_parse_error(config_path, tmp_path):
    session = str(tmp_path / "s.json")
    main(["session", "new", "--session", session, "--config", config_path])
    main(["session", "suggest", "--session", session])
    assert main(["session", "tell", "--session", session, "--x", "0.5", "--y", "abc"]) == EXIT_CONFIG


def test_map_oracle_mode(config_path, tmp_path):
    out = tmp_path / "map.csv"
    assert main(["map", "--config", config_path, "--mode", "oracle",
                 "--grid", "181", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "x,stable"
    assert len(lines) == 182
    rows = {float(l.split(",")[0]): int(l.split(",")[1]) for l in lines[1:]}
    assert rows[0.25] == 0
    assert rows[0.8] == 1


def test_map_two_rows(config_path, tmp_path):
    out = tmp_path / "map2.csv"
    assert main(["map", "--config", config_path, "--mode", "oracle",
                 "--grid", "2", "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().strip().split("\n")) == 3


def test_map_unwritable_out(config_path):
    assert main(["map", "--config", config_path, "--mode", "oracle",
                 "--grid", "2", "--out", "/proc/definitely/not/writable.csv"]) == EXIT_IO


def test_map_gp_score_mode(config_path, tmp_path):
    out = tmp_path / "gpmap.csv"
    assert main(["map", "--config", config_path, "--mode", "gp_score",
                 "--grid", "41", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "x,score,score_q1,score_q2,score_q3"
    assert len(lines) == 42


def test_seed_flag_overrides_config(config_path, tmp_path):
    outs = []
    for seed in ("5", "5", "6"):
        out = tmp_path / f"seed{seed}_{len(outs)}.csv"
        assert main(["run", "--config", config_path, "--seed", seed,
                     "--out", str(out)]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_experiment_command(config_path, tmp_path, capsys):
    out_dir = tmp_path / "exp"
    assert main(["experiment", "--config", config_path, "--out", str(out_dir),
                 "--repeats", "1", "--acq", "ucb"]) == EXIT_OK
    assert (out_dir / "summary.json").exists()
    summary = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    assert "ucb" in summary
