import json
from pathlib import Path

import pytest

from app.services.experiments import (experiment_config_from_dict,
                                      load_experiment_config, run_experiment)
from app.utils.errors import ExperimentConfigError
from app.utils.mdp_io import dump_mdp
from app.utils.output import read_csv


def _config(tmp_path, kind, params=None, acceptance=None, seeds=(0,), **extra):
    raw = {
        "kind": kind,
        "name": f"test-{kind}",
        "seeds": list(seeds),
        "output_dir": str(tmp_path),
        "params": params or {},
        "acceptance": acceptance or {},
        **extra,
    }
    return experiment_config_from_dict(raw)


class TestConfig:
    def test_defaults_are_merged(self, tmp_path):
        cfg = _config(tmp_path, "hull-sweep", params={"K": 2})
        assert cfg.params["K"] == 2
        assert cfg.params["n_states"] == 6
        assert cfg.acceptance["ratio_high"] == 0.7

    @pytest.mark.parametrize("raw,field", [
        ({"kind": "nope", "name": "x", "seeds": [0]}, "kind"),
        ({"kind": "warmstart", "name": "x", "seeds": [0], "params": {"foo": 1}}, "params.foo"),
        ({"kind": "warmstart", "name": "x", "seeds": []}, "seeds"),
        ({"kind": "warmstart", "name": "x", "seeds": [0], "budget_scales": [0.0]}, "budget_scales"),
        ({"kind": "transfer-sweep", "name": "x", "seeds": [0], "params": {"instance": "file"}}, "params.prior_file"),
        ({"kind": "transfer-sweep", "name": "x", "seeds": [0], "params": {"instance": "torus"}}, "params.instance"),
    ])
    def test_invalid_fields_are_named(self, raw, field):
        with pytest.raises(ExperimentConfigError) as exc:
            experiment_config_from_dict(raw)
        assert exc.value.field == field

    def test_seed_range_shorthand(self):
        cfg = experiment_config_from_dict({"kind": "warmstart", "name": "x", "seeds": {"start": 5, "count": 3}})
        assert cfg.seeds == [5, 6, 7]

    def test_empty_seed_range_is_rejected(self):
        with pytest.raises(ExperimentConfigError) as exc:
            experiment_config_from_dict({"kind": "warmstart", "name": "x", "seeds": {"count": 0}})
        assert exc.value.field == "seeds"

    def test_environment_overrides_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TRANSFER_MDP_OUTPUT_DIR", str(tmp_path / "elsewhere"))
        cfg = _config(tmp_path, "warmstart")
        assert cfg.output_dir == tmp_path / "elsewhere"

    def test_prior_file_resolves_next_to_the_toml(self, tmp_path, random_prior):
        dump_mdp(random_prior, tmp_path / "prior.json")
        path = tmp_path / "sweep.toml"
        path.write_text(
            'kind = "transfer-sweep"\nname = "file"\nseeds = [0]\n'
            '[params]\ninstance = "file"\nprior_file = "prior.json"\n'
        )
        cfg = load_experiment_config(path)
        assert Path(cfg.params["prior_file"]) == tmp_path / "prior.json"

    def test_missing_prior_file(self, tmp_path):
        path = tmp_path / "sweep.toml"
        path.write_text('kind = "transfer-sweep"\nname = "f"\nseeds = [0]\n[params]\ninstance = "file"\nprior_file = "gone.json"\n')
        with pytest.raises(ExperimentConfigError, match="does not exist"):
            load_experiment_config(path)

    def test_toml_syntax_error(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("kind = \n")
        with pytest.raises(ExperimentConfigError) as exc:
            load_experiment_config(path)
        assert exc.value.field == "toml"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ExperimentConfigError) as exc:
            load_experiment_config(tmp_path / "missing.toml")
        assert exc.value.field == "path"

    def test_shipped_configs_load(self):
        root = Path(__file__).resolve().parent.parent / "experiments"
        paths = sorted(root.glob("*.toml"))
        assert paths
        for path in paths:
            load_experiment_config(path)


class TestRuns:
    def test_transfer_sweep(self, tmp_path):
        cfg = _config(
            tmp_path, "transfer-sweep", seeds=(0, 1), budget_scales=[1.0],
            params={"instance": "single-reward", "beta": 0.002, "samples_per_pair": 50},
            acceptance={"min_success_rate": 0.0, "n_bar_equals_s_prime": 1},
        )
        summary = run_experiment(cfg)
        assert summary.n_trials == 2
        assert summary.n_errors == 0
        out = tmp_path / "test-transfer-sweep"
        rows = read_csv(out / "trials.csv")
        assert [r["samples_per_pair"] for r in rows] == ["50", "50"]
        names = {c.name: c for c in summary.criteria}
        assert names["audit_rate"].passed
        assert names["n_bar_equals_s_prime"].passed
        payload = json.loads((out / "summary.json").read_text())
        assert payload["kind"] == "transfer-sweep"
        assert "samples_by_scale.svg" in payload["files"]

    def test_transfer_success_is_reported_per_scale(self, tmp_path):
        cfg = _config(
            tmp_path, "transfer-sweep", seeds=(0,), budget_scales=[0.001, 0.002],
            params={"instance": "single-reward", "beta": 0.002, "samples_per_pair": 20},
            acceptance={"min_success_rate": 0.0},
        )
        summary = run_experiment(cfg)
        names = [c.name for c in summary.criteria]
        assert "success_rate_0.001" in names
        assert "success_rate_0.002" in names
        assert "success_rate" not in names
        rows = read_csv(tmp_path / "test-transfer-sweep" / "success_by_scale.csv")
        assert [r["budget_scale"] for r in rows] == ["0.001", "0.002"]

    def test_hardcase_figures(self, tmp_path):
        cfg = _config(
            tmp_path, "hardcase-figures",
            params={
                "betas": [0.1, 0.5, 1.0],
                "gammas": [0.91, 0.95, 0.99],
                "instances": [{"beta": 0.2, "gamma": 0.9, "eps": 0.01, "p0": [[0.97, 0.9, 0.87, 0.7]],
                               "expected": {"Lk": [3], "c_bar": 19.9995}}],
            },
        )
        summary = run_experiment(cfg)
        out = tmp_path / "test-hardcase-figures"
        assert len(read_csv(out / "curves.csv")) == 9
        checks = read_csv(out / "hardcase_checks.csv")
        assert checks[0]["n_hypotheses"] == "3"
        assert checks[0]["expected_ok"] == "true"
        names = {c.name: c for c in summary.criteria}
        assert names["hardcase_checks"].passed
        assert names["domain_violations"].passed
        assert "eps0_correlation" in names

    def test_hardcase_gamma_points(self, tmp_path):
        cfg = _config(tmp_path, "hardcase-figures", params={"betas": [0.1, 0.5], "gamma_points": 3})
        summary = run_experiment(cfg)
        rows = read_csv(tmp_path / "test-hardcase-figures" / "curves.csv")
        assert len(rows) == 6
        assert all(r["gamma_valid"] == "true" for r in rows)
        assert "eps0_correlation" not in {c.name for c in summary.criteria}

    def test_warmstart(self, tmp_path):
        cfg = _config(
            tmp_path, "warmstart", seeds=(0,),
            params={"sailing": {"width": 3, "height": 3, "n_winds": 2}, "max_iters": 20, "n_points": 5},
            acceptance={"min_jumpstart_rate": 0.0},
        )
        summary = run_experiment(cfg)
        assert summary.n_errors == 0
        assert summary.passed
        warm = read_csv(tmp_path / "test-warmstart" / "curve_warm.csv")
        assert [int(r["sweep"]) for r in warm] == [0, 4, 8, 12, 16, 20]

    def test_hull_sweep(self, tmp_path):
        cfg = _config(
            tmp_path, "hull-sweep", seeds=(0, 1),
            params={
                "K": 2, "n_states": 4, "sample_sizes": [1000, 4000], "bound_samples": 4000,
                "noise_free_points": 5, "noise_free_K": [1, 2],
            },
            acceptance={"ratio_low": 0.0, "ratio_high": 10.0},
        )
        summary = run_experiment(cfg)
        out = tmp_path / "test-hull-sweep"
        assert len(read_csv(out / "coefficient_errors.csv")) == 4
        assert len(read_csv(out / "noise_free.csv")) == 5
        bounds = read_csv(out / "gap_bound.csv")
        assert [r["n_samples"] for r in bounds] == ["4000", "4000"]
        names = {c.name: c for c in summary.criteria}
        assert names["gap_bound_rate"].passed
        assert names["noise_free_error"].passed
        assert "median_ratio_1000_4000" in names

    def test_bound_sweep(self, tmp_path):
        cfg = _config(tmp_path, "bound-sweep", seeds=(0, 1), params={"n_pairs": 24, "max_states": 5, "max_actions": 3})
        summary = run_experiment(cfg)
        assert summary.n_trials == 48
        assert summary.n_errors == 0
        assert summary.passed
        rows = read_csv(tmp_path / "test-bound-sweep" / "pairs.csv")
        assert {(r["gamma"], r["beta"]) for r in rows} == {
            ("0.5", "0.05"), ("0.9", "0.05"), ("0.5", "0.2"), ("0.9", "0.2"),
        }
        for r in rows:
            assert float(r["tv"]) <= float(r["beta"])
            assert float(r["q_gap"]) <= float(r["q_bound"])
            assert r["sound"] == "true"
            assert 2 <= int(r["n_states"]) <= 5
        names = {c.name for c in summary.criteria}
        assert names == {"errors", "q_bound_rate", "value_bound_rate", "soundness_rate"}
