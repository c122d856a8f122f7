import json

import pytest

from app.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from app.services.instances import random_hull
from app.utils.mdp_io import dump_mdp

pytestmark = pytest.mark.cli


def test_validate_ok(tmp_path, two_state_document, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(two_state_document, indent=1))
    assert main(["validate", str(path)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report == {"valid": True, "n_states": 2, "n_pairs": 3, "s_prime": [0], "gamma": 0.9}


def test_validate_reports_file_and_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n "gamma": 0.9,\n "states": 1,\n "actions": [[0]],\n "transitions": {\n  "0,0": [0.5]\n }\n}\n')
    assert main(["validate", str(path)]) == EXIT_FAILED
    err = capsys.readouterr().err
    assert f"{path}:6: transition (0,0) sums to 0.5, not 1" in err


def test_hardcase(capsys):
    code = main(["hardcase", "--beta", "0.2", "--gamma", "0.9", "--eps", "0.01", "--p0", "0.97,0.9,0.87,0.7"])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["n_hypotheses"] == 3
    assert report["ball_membership"] is True
    assert report["thresholds"][0]["size_upper"] == 4


def test_hardcase_writes_manifest(tmp_path, capsys):
    code = main(["hardcase", "--beta", "0.2", "--gamma", "0.9", "--eps", "0.01",
                 "--p0", "0.97,0.9", "--p0", "0.97,0.5", "--out", str(tmp_path / "fam")])
    assert code == EXIT_OK
    assert (tmp_path / "fam" / "manifest.json").exists()


def test_hardcase_outside_domain():
    assert main(["hardcase", "--beta", "0.2", "--gamma", "0.9", "--eps", "0.05", "--p0", "0.97,0.9"]) == EXIT_FAILED


def test_run_with_bad_config(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('kind = "warmstart"\nname = "x"\nseeds = [0]\n[params]\nbogus = 1\n')
    assert main(["run", str(path)]) == EXIT_USAGE


def test_run_small_experiment(tmp_path, capsys):
    path = tmp_path / "small.toml"
    path.write_text(
        'kind = "hardcase-figures"\nname = "small"\nseeds = [0]\n'
        f'output_dir = "{tmp_path.as_posix()}"\n'
        '[params]\nbetas = [0.1, 0.5, 1.0]\ngammas = [0.95]\n'
    )
    assert main(["run", str(path), "--workers", "1"]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["passed"] is True
    assert (tmp_path / "small" / "summary.json").exists()


def test_hull_with_known_coefficients(tmp_path, capsys):
    paths = []
    for i, base in enumerate(random_hull(2, 4, 2, 0.9, seed=3)):
        paths += ["--base", str(dump_mdp_path(base, tmp_path / f"b{i}.json"))]
    code = main(["hull", *paths, "--coefficients", "0.3,0.7", "--eps", "0.5", "--delta", "0.05",
                 "--samples", "4000", "--out", str(tmp_path)])
    assert code == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["n_samples"] == 4000
    assert result["bound_holds"] is True
    assert (tmp_path / "hull_manifest.json").exists()


def dump_mdp_path(mdp, path):
    dump_mdp(mdp, path)
    return path


def test_subcommand_required():
    with pytest.raises(SystemExit):
        main([])
