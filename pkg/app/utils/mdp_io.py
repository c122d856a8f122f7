"""
JSON MDP files.

    {"gamma": 0.9, "states": 3, "actions": [[0, 1], [0], [0]],
     "transitions": {"0,0": [0.5, 0.5, 0.0], ...},
     "rewards": {"0,0,1": 1.0, ...}}

Rewards are sparse; missing triples are zero. The loader reports every
problem it finds, with the line of the offending key where it can.
"""

import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from app.models.mdp import PROB_TOL, Mdp
from app.utils.errors import MdpValidationError

logger = logging.getLogger("mdp_io")

Diagnostic = Tuple[Optional[int], str]

_KEY = re.compile(r'"([^"\\]*)"\s*:')


def _key_lines(text: str) -> Dict[str, int]:
    lines: Dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        for key in _KEY.findall(line):
            lines.setdefault(key, lineno)
    return lines


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _parse_key(key: str, size: int) -> Optional[Tuple[int, ...]]:
    parts = key.split(",")
    if len(parts) != size:
        return None
    try:
        return tuple(int(p.strip()) for p in parts)
    except ValueError:
        return None


def mdp_from_document(doc: Any, key_lines: Optional[Dict[str, int]] = None) -> Mdp:
    """
    Build an Mdp from a decoded JSON document.

    Raises:
        MdpValidationError: With one diagnostic per problem found
    """
    key_lines = key_lines or {}
    line = key_lines.get
    problems: List[Diagnostic] = []

    if not isinstance(doc, dict):
        raise MdpValidationError("invalid MDP document", [(1, "top level must be a JSON object")])
    for name in ("gamma", "states", "actions", "transitions"):
        if name not in doc:
            problems.append((None, f"missing required key '{name}'"))
    if problems:
        raise MdpValidationError("invalid MDP document", problems)

    gamma = doc["gamma"]
    if not _is_number(gamma) or not 0.0 < gamma < 1.0:
        problems.append((line("gamma"), f"gamma must be a number in (0, 1), got {gamma!r}"))
    n_states = doc["states"]
    if not isinstance(n_states, int) or isinstance(n_states, bool) or n_states < 1:
        raise MdpValidationError(
            "invalid MDP document", problems + [(line("states"), f"states must be a positive integer, got {n_states!r}")]
        )

    actions = doc["actions"]
    if not isinstance(actions, list) or len(actions) != n_states:
        raise MdpValidationError(
            "invalid MDP document", problems + [(line("actions"), f"actions must list one action list per state ({n_states})")]
        )
    action_sets: List[Tuple[int, ...]] = []
    for s, acts in enumerate(actions):
        if not isinstance(acts, list) or not acts:
            problems.append((line("actions"), f"state {s} must have a nonempty action list"))
            action_sets.append(())
            continue
        if any(not isinstance(a, int) or isinstance(a, bool) or a < 0 for a in acts):
            problems.append((line("actions"), f"state {s} lists an invalid action index"))
            action_sets.append(())
            continue
        if len(set(acts)) != len(acts):
            problems.append((line("actions"), f"state {s} lists a duplicate action"))
        action_sets.append(tuple(sorted(set(acts))))
    n_actions = 1 + max((max(acts) for acts in action_sets if acts), default=0)

    transition = np.zeros((n_states, n_actions, n_states))
    reward = np.zeros_like(transition)
    seen = set()
    rows = doc["transitions"]
    if not isinstance(rows, dict):
        problems.append((line("transitions"), "transitions must be an object keyed by \"s,a\""))
        rows = {}
    for key, row in rows.items():
        pair = _parse_key(key, 2)
        if pair is None:
            problems.append((line(key), f"transition key '{key}' is not of the form \"s,a\""))
            continue
        s, a = pair
        if not (0 <= s < n_states and a in action_sets[s]):
            problems.append((line(key), f"transition for unavailable pair ({s},{a})"))
            continue
        if not isinstance(row, list) or len(row) != n_states or not all(_is_number(p) for p in row):
            problems.append((line(key), f"transition ({s},{a}) must list {n_states} finite numbers"))
            continue
        if any(p < 0 for p in row):
            problems.append((line(key), f"transition ({s},{a}) has a negative probability"))
            continue
        total = math.fsum(row)
        if abs(total - 1.0) > PROB_TOL:
            problems.append((line(key), f"transition ({s},{a}) sums to {total!r}, not 1"))
            continue
        transition[s, a] = row
        seen.add((s, a))
    for s, acts in enumerate(action_sets):
        for a in acts:
            if (s, a) not in seen and not any(d[1].startswith(f"transition ({s},{a})") for d in problems):
                problems.append((line("transitions"), f"missing transition for pair ({s},{a})"))

    rewards = doc.get("rewards", {})
    if not isinstance(rewards, dict):
        problems.append((line("rewards"), "rewards must be an object keyed by \"s,a,s'\""))
        rewards = {}
    for key, value in rewards.items():
        triple = _parse_key(key, 3)
        if triple is None:
            problems.append((line(key), f"reward key '{key}' is not of the form \"s,a,s'\""))
            continue
        s, a, sp = triple
        if not (0 <= s < n_states and a in action_sets[s] and 0 <= sp < n_states):
            problems.append((line(key), f"reward for unavailable triple ({s},{a},{sp})"))
            continue
        if not _is_number(value) or not 0.0 <= value <= 1.0:
            problems.append((line(key), f"reward ({s},{a},{sp}) must lie in [0, 1], got {value!r}"))
            continue
        reward[s, a, sp] = value

    if problems:
        raise MdpValidationError("invalid MDP document", problems)
    return Mdp(transition=transition, reward=reward, gamma=gamma, actions_per_state=tuple(action_sets))


def parse_mdp(text: str) -> Mdp:
    """Parse and validate MDP JSON text"""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MdpValidationError("malformed JSON", [(e.lineno, e.msg)]) from e
    return mdp_from_document(doc, _key_lines(text))


def load_mdp(path: Union[str, Path]) -> Mdp:
    path = Path(path)
    mdp = parse_mdp(path.read_text())
    logger.debug(f"loaded {mdp.n_states}-state MDP from {path}")
    return mdp


def mdp_to_document(mdp: Mdp) -> Dict[str, Any]:
    transitions = {f"{s},{a}": [float(p) for p in mdp.transition[s, a]] for s, a in mdp.pairs()}
    rewards = {
        f"{s},{a},{sp}": float(mdp.reward[s, a, sp])
        for s, a in mdp.pairs()
        for sp in np.flatnonzero(mdp.reward[s, a])
    }
    return {
        "gamma": mdp.gamma,
        "states": mdp.n_states,
        "actions": [list(acts) for acts in mdp.actions_per_state],
        "transitions": transitions,
        "rewards": rewards,
    }


def dump_mdp(mdp: Mdp, path: Optional[Union[str, Path]] = None) -> str:
    """Serialize ``mdp``; also write it to ``path`` when given"""
    text = json.dumps(mdp_to_document(mdp), indent=1) + "\n"
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text
