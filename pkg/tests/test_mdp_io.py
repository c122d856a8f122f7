import json

import numpy as np
import pytest

from app.utils.errors import MdpValidationError
from app.utils.mdp_io import (dump_mdp, load_mdp, mdp_from_document,
                              mdp_to_document, parse_mdp)


class TestLoad:
    def test_document(self, two_state_document, two_state_mdp):
        mdp = mdp_from_document(two_state_document)
        assert mdp.actions_per_state == ((0, 1), (0,))
        assert np.array_equal(mdp.transition, two_state_mdp.transition)
        assert np.array_equal(mdp.reward, two_state_mdp.reward)

    def test_load_file(self, two_state_document, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(two_state_document))
        assert load_mdp(path).gamma == 0.9

    def test_dump_then_load(self, random_prior, tmp_path):
        dump_mdp(random_prior, tmp_path / "out" / "prior.json")
        loaded = load_mdp(tmp_path / "out" / "prior.json")
        assert np.array_equal(loaded.transition, random_prior.transition)
        assert np.array_equal(loaded.reward, random_prior.reward)

    def test_sparse_rewards(self, two_state_mdp):
        doc = mdp_to_document(two_state_mdp)
        assert doc["rewards"] == {"0,0,0": 1.0}


class TestDiagnostics:
    def test_missing_keys(self):
        with pytest.raises(MdpValidationError) as exc:
            mdp_from_document({"gamma": 0.9})
        messages = [m for _, m in exc.value.diagnostics]
        assert len(messages) == 3
        assert any("'transitions'" in m for m in messages)

    def test_collects_every_problem(self, two_state_document):
        doc = dict(two_state_document)
        doc["transitions"] = {"0,0": [0.7, 0.2], "0,1": [0.0, 1.0], "1,0": [0.0, 1.0], "1,1": [0.0, 1.0]}
        doc["rewards"] = {"0,0,0": 2.0}
        with pytest.raises(MdpValidationError) as exc:
            mdp_from_document(doc)
        messages = [m for _, m in exc.value.diagnostics]
        assert len(messages) == 3
        assert any("sums to" in m for m in messages)
        assert any("unavailable pair (1,1)" in m for m in messages)
        assert any("must lie in [0, 1]" in m for m in messages)

    def test_missing_transition(self, two_state_document):
        doc = dict(two_state_document)
        doc["transitions"] = {"0,0": [1.0, 0.0], "1,0": [0.0, 1.0]}
        with pytest.raises(MdpValidationError, match=r"missing transition for pair \(0,1\)"):
            mdp_from_document(doc)

    def test_line_numbers(self):
        text = (
            '{\n'
            '  "gamma": 0.9,\n'
            '  "states": 1,\n'
            '  "actions": [[0]],\n'
            '  "transitions": {\n'
            '    "0,0": [0.5]\n'
            '  }\n'
            '}\n'
        )
        with pytest.raises(MdpValidationError) as exc:
            parse_mdp(text)
        assert exc.value.diagnostics == [(6, "transition (0,0) sums to 0.5, not 1")]

    def test_malformed_json(self):
        with pytest.raises(MdpValidationError) as exc:
            parse_mdp('{\n  "gamma": 0.9,\n  oops\n}')
        assert exc.value.diagnostics[0][0] == 3

    def test_bad_gamma_and_actions(self):
        doc = {"gamma": 1.5, "states": 2, "actions": [[0]], "transitions": {}}
        with pytest.raises(MdpValidationError) as exc:
            mdp_from_document(doc)
        messages = [m for _, m in exc.value.diagnostics]
        assert any("gamma" in m for m in messages)
        assert any("one action list per state" in m for m in messages)

    def test_top_level_must_be_object(self):
        with pytest.raises(MdpValidationError):
            mdp_from_document([1, 2])
