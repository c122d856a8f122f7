import json
import math

import numpy as np
import pytest

from app.models.configs import HardCaseParams
from app.services.hardcase import (CURVE_COLUMNS, alpha1_value, alpha2_value,
                                   assemble_family, build_family, derive_params,
                                   eps0_value, family_oracles, inflate_alpha2,
                                   lower_bound_curves, lower_threshold,
                                   p0k_value, separation_check, threshold_report,
                                   verify_ball_membership, write_manifest)
from app.services.planning import tv_distance
from app.utils.errors import ParameterDomainError
from app.utils.mdp_io import load_mdp


@pytest.fixture
def two_state_params():
    return HardCaseParams(beta=0.2, gamma=0.9, eps=0.01, p0=[[0.97, 0.9, 0.87, 0.7], [0.97, 0.9, 0.5, 0.4]])


@pytest.fixture
def case_two_params():
    # beta/2 + (4γ-1)/(3γ) < 1 here
    return HardCaseParams(beta=0.01, gamma=0.95, eps=0.001, p0=[[0.99, 0.985]])


class TestDerivedQuantities:
    def test_worked_example(self, example_params):
        d = derive_params(example_params)
        assert d.p0k[0] == pytest.approx(2.6 / 2.7)
        assert d.eps0 == pytest.approx(0.0234375)
        assert d.alpha1[0] == pytest.approx(3.94e-4, rel=1e-2)
        assert d.alpha2[0] == pytest.approx(7.90e-4, rel=1e-3)
        assert d.Lk == (3,)
        assert d.c_bar == pytest.approx(19.9995)
        assert d.c_lower[0] == pytest.approx(3.382, abs=1e-3)
        assert d.lower_case == 1

    def test_alpha1_solves_the_gap_equation(self, example_params):
        p, gamma, eps = 2.6 / 2.7, 0.9, 0.01
        a1 = alpha1_value(p, gamma, eps)
        gap = 1.0 / (1.0 - gamma * (p + a1)) - 1.0 / (1.0 - gamma * p)
        assert gap == pytest.approx(2 * eps, abs=1e-12)

    def test_alpha2_separates(self):
        p, gamma, eps = 2.6 / 2.7, 0.9, 0.01
        a1, a2 = alpha1_value(p, gamma, eps), alpha2_value(p, gamma, eps)
        q = lambda x: 1.0 / (1.0 - gamma * x)
        assert 0 < a1 < a2 < 0.1
        assert q(p + a2) - q(p + a1) >= 2 * eps

    def test_p0k_floor(self):
        assert p0k_value(0.97, 0.2, 0.9) == pytest.approx(2.6 / 2.7)
        assert p0k_value(0.99, 0.01, 0.95) == pytest.approx(0.985)

    def test_eps0_takes_minimum_over_states(self):
        values = [eps0_value([p], 0.2, 0.9) for p in (0.965, 0.98)]
        assert eps0_value([0.965, 0.98], 0.2, 0.9) == pytest.approx(min(values))

    @pytest.mark.parametrize("beta,gamma,expected", [(0.3, 0.85, 0.0234375 * 1.5 * 2 / 3), (0.5, 0.8, 0.0293)])
    def test_eps0_on_floor_branch(self, beta, gamma, expected):
        # p0k sits on the floor, where eps0 = 3β / (256 (1-γ))
        params = HardCaseParams(beta=beta, gamma=gamma, eps=0.01, p0=[[0.97, 0.9, 0.87, 0.7]])
        d = derive_params(params)
        assert d.eps0 == pytest.approx(3 * beta / (256 * (1 - gamma)))
        assert d.eps0 == pytest.approx(expected, rel=1e-2)
        assert d.lower_case == 1

    def test_lower_forms_agree_in_first_case(self, example_params):
        d = derive_params(example_params)
        assert d.c_lower[0] == pytest.approx(d.c_lower_direct[0], abs=1e-9)

    def test_second_case_is_conservative(self, case_two_params):
        d = derive_params(case_two_params)
        assert d.lower_case == 2
        assert d.c_lower[0] >= d.c_lower_direct[0] - 1e-9
        assert d.c_lower[0] < d.v_star[0]

    def test_lower_threshold_reports_case(self):
        _, case = lower_threshold(10.0, 0.2, 0.9, 0.01)
        assert case == 1
        _, case = lower_threshold(10.0, 0.01, 0.95, 0.001)
        assert case == 2

    def test_eps_at_or_above_eps0(self):
        params = HardCaseParams(beta=0.2, gamma=0.9, eps=0.03, p0=[[0.97, 0.9]])
        with pytest.raises(ParameterDomainError) as exc:
            derive_params(params)
        assert exc.value.constraint == "eps < eps0"


class TestFamily:
    @pytest.mark.parametrize("row,lk,n_hypotheses", [
        ([0.97, 0.9, 0.87, 0.7], 3, 3),
        ([0.97, 0.9], 2, 2),
        ([0.97, 0.5], 1, 1),
    ])
    def test_hypothesis_count(self, row, lk, n_hypotheses):
        fam = build_family(HardCaseParams(beta=0.2, gamma=0.9, eps=0.01, p0=[row]))
        assert fam.derived.Lk == (lk,)
        assert fam.n_hypotheses == n_hypotheses

    def test_two_decision_states(self, two_state_params):
        fam = build_family(two_state_params)
        assert fam.derived.Lk == (3, 2)
        assert fam.n_hypotheses == 4
        labels = [label for label, _ in fam.hypotheses()]
        assert labels == ["M1", "M_1,2", "M_1,3", "M_2,2"]
        assert fam.prior.n_states == 2 + 2 * 2 * 4

    def test_layout(self, example_params):
        fam = build_family(example_params)
        prior = fam.prior
        K, L = 1, 4
        for l in range(L):
            y1, y2 = K + l, K + K * L + l
            assert prior.transition[0, l, y1] == 1.0
            assert prior.transition[y1, 0, y1] == pytest.approx(example_params.p0[0][l])
            assert prior.transition[y2, 0, y2] == 1.0
        assert prior.s_prime == (0,)

    def test_ball_membership(self, example_params, two_state_params):
        assert verify_ball_membership(build_family(example_params))
        fam = build_family(two_state_params)
        assert verify_ball_membership(fam)
        assert all(tv_distance(fam.prior, m) <= 0.2 + 1e-12 for _, m in fam.hypotheses())

    def test_inflated_window_leaves_the_ball(self, example_params):
        d = derive_params(example_params)
        inflated = inflate_alpha2(d, [1.0 - d.p0k[0] - 1e-6])
        fam = assemble_family(example_params, inflated)
        assert not verify_ball_membership(fam)

    def test_separation(self, two_state_params):
        fam = build_family(two_state_params)
        report = separation_check(fam)
        assert report.passed
        m1 = [m for m in report.margins if m.hypothesis == "M1"]
        assert [m.margin for m in m1] == pytest.approx([0.02, 0.02], abs=1e-9)
        for m in report.margins:
            if m.hypothesis != "M1":
                assert m.best_action == m.expected_action
                assert m.margin >= 0.02
        assert len(report.rows()) == 2 + 3

    def test_threshold_report(self, example_params):
        rows = threshold_report(build_family(example_params))
        assert rows == [{
            "k": 0,
            "Lk": 3,
            "size_upper": 4,
            "size_lower": 3,
            "size_lower_direct": 3,
            "lower_forms_agree": True,
            "bounds_meet": False,
        }]

    def test_oracles(self, two_state_params):
        fam = build_family(two_state_params)
        oracles = family_oracles(fam, seed=1)
        assert len(oracles) == fam.n_hypotheses
        assert oracles[0].gamma == 0.9

    def test_manifest(self, example_params, tmp_path):
        fam = build_family(example_params)
        path = write_manifest(fam, tmp_path / "family")
        manifest = json.loads(path.read_text())
        assert manifest["files"]["M_1,2"] == "M_1_2.json"
        assert manifest["derived"]["Lk"] == [3]
        prior = load_mdp(tmp_path / "family" / "prior.json")
        assert np.allclose(prior.transition, fam.prior.transition)


class TestCurves:
    def test_grid_shape_and_columns(self):
        rows = lower_bound_curves([0.1, 0.5, 1.0], [0.91, 0.95, 0.99])
        assert len(rows) == 9
        assert all(set(CURVE_COLUMNS) <= set(r) for r in rows)
        assert all(r["gamma_valid"] and r["eps_valid"] for r in rows)

    def test_eps0_on_curves(self):
        (row,) = lower_bound_curves([0.2], [0.95])
        assert row["eps0"] == pytest.approx(3 * 0.2 / (256 * 0.05))
        assert row["eps"] == pytest.approx(0.5 * row["eps0"])
        assert row["c_lower"] <= row["c_bar"]
        assert row["p0k_branch"] == "floor"
        assert row["c_bar_branch"] == "horizon"

    def test_radius_branch(self):
        (row,) = lower_bound_curves([0.01], [0.95])
        assert row["c_bar_branch"] == "radius"
        assert row["p0k_branch"] == "shifted"
        assert row["lower_case"] == 2

    def test_out_of_domain_cells_are_flagged(self):
        (row,) = lower_bound_curves([0.01], [0.5])
        assert not row["gamma_valid"]
        assert math.isnan(row["eps0"]) and math.isnan(row["c_lower"])

    def test_explicit_eps_above_eps0(self):
        (row,) = lower_bound_curves([0.2], [0.95], eps_values=[1.0])
        assert row["gamma_valid"] and not row["eps_valid"]
        assert math.isnan(row["c_lower"])

    def test_eps_ratio_domain(self):
        with pytest.raises(ValueError):
            lower_bound_curves([0.2], [0.95], eps_ratio=1.0)
