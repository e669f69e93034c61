"""Benchmark objective, stability maps and the experiment harness."""

import json

import numpy as np
import pytest

from stablebo.bench import (
    ExperimentConfig,
    run_experiment,
    stability_map,
    synthetic_config,
    synthetic_objective,
)


def test_synthetic_objective_values():
    assert synthetic_objective(0.25) == pytest.approx(4.0, abs=0.01)
    assert synthetic_objective(0.8) == pytest.approx(1.05, abs=0.01)
    assert synthetic_objective(10.0) < 1e-12


def test_synthetic_objective_accepts_arrays():
    assert synthetic_objective(np.array([0.8])) == pytest.approx(1.05, abs=0.01)


def test_oracle_map_classifies_extremes():
    grid = np.linspace(0.05, 0.95, 181)
    result = stability_map(synthetic_objective, grid, 0.2, 0.0125, mode="oracle")
    lookup = dict(zip(np.round(result["x"], 3), result["stable"]))
    assert not lookup[0.25]
    assert lookup[0.8]


def test_oracle_map_constant_function():
    grid = np.linspace(0, 1, 21)
    result = stability_map(lambda x: 1.0, grid, 0.2, 0.0125, mode="oracle")
    assert bool(np.all(result["stable"]))


def test_gp_map_constant_function_scores_high():
    grid = np.linspace(0, 1, 21)
    result = stability_map(lambda x: 1.0, grid, 0.2, 0.0125, mode="gp_score",
                           n_obs=200, n_samples=500)
    assert np.all(result["score"] >= 0.99)


def test_gp_map_shapes_and_ranges():
    grid = np.linspace(0.05, 0.95, 31)
    result = stability_map(synthetic_objective, grid, 0.2, 0.0125, mode="gp_score",
                           eps=0.1867, p=3, n_obs=120, n_samples=500,
                           obs_bounds=(0.0, 1.0))
    assert result["score"].shape == (31,)
    assert result["score_q"].shape == (3, 31)
    assert np.all((result["score"] >= 0.0) & (result["score"] <= 1.0))
    # product of per-order components
    np.testing.assert_allclose(result["score"], np.prod(result["score_q"], axis=0), atol=1e-12)


def test_experiment_smoke(tmp_path):
    template = synthetic_config("ucbsg", seed=1, budget=2)
    from dataclasses import replace

    template = replace(template, grid_resolution=201, n_samples=200)
    cfg = ExperimentConfig(
        template=template,
        out_dir=str(tmp_path),
        kinds=("ucbsg", "ucb"),
        repeats=1,
    )
    summary = run_experiment(cfg)
    for kind in ("ucbsg", "ucb"):
        conv = (tmp_path / f"convergence_{kind}.csv").read_text().strip().split("\n")
        assert conv[0] == "repeat,iter,rec_x0,f_rec"
        assert len(conv) == 3  # header + two iterations
        recs = (tmp_path / f"recommendations_{kind}.csv").read_text().strip().split("\n")
        assert recs[0] == "repeat,x0,f_value,oracle_stable"
        assert len(recs) == 2
        assert summary[kind]["repeats"] == 1
    blob = json.loads((tmp_path / "summary.json").read_text())
    assert set(blob) == {"ucbsg", "ucb"}


def test_experiment_deterministic_given_master_seed(tmp_path):
    template = synthetic_config("ucb", seed=42, budget=2)
    from dataclasses import replace

    template = replace(template, grid_resolution=101, n_samples=100)
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    for d in (a_dir, b_dir):
        run_experiment(ExperimentConfig(template=template, out_dir=str(d),
                                        kinds=("ucb",), repeats=2))
    assert (a_dir / "recommendations_ucb.csv").read_bytes() == (
        b_dir / "recommendations_ucb.csv"
    ).read_bytes()


def test_experiment_parallel_workers_match_sequential(tmp_path):
    from dataclasses import replace

    template = replace(synthetic_config("ucb", seed=3, budget=2),
                       grid_resolution=101, n_samples=100)
    seq_dir, par_dir = tmp_path / "seq", tmp_path / "par"
    run_experiment(ExperimentConfig(template=template, out_dir=str(seq_dir),
                                    kinds=("ucb",), repeats=2, workers=1))
    run_experiment(ExperimentConfig(template=template, out_dir=str(par_dir),
                                    kinds=("ucb",), repeats=2, workers=2))
    assert (seq_dir / "recommendations_ucb.csv").read_bytes() == (
        par_dir / "recommendations_ucb.csv"
    ).read_bytes()


def test_experiment_rejects_bad_config(tmp_path):
    from stablebo.mathcore import DomainError

    with pytest.raises(DomainError):
        ExperimentConfig(template=synthetic_config(), out_dir=str(tmp_path), repeats=0)
    with pytest.raises(DomainError):
        ExperimentConfig(template=synthetic_config(), out_dir=str(tmp_path),
                         objective="rosenbrock")
