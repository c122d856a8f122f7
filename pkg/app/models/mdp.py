"""
Tabular MDP domain types.

Every array held by these types is made read-only on construction, so
instances can be shared freely between threads.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from app.utils.errors import MdpValidationError

PROB_TOL = 1e-12
VALUE_SLACK = 1e-8


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Mdp:
    """
    Finite discounted MDP with per-state action lists.

    Action indices are global (0..n_actions-1); a state's available actions
    are listed in ``actions_per_state``. Rows of unavailable pairs are zero.

    Args:
        transition: Array (S, A, S) of next-state probabilities
        reward: Array (S, A, S) of rewards r(s, a, s') in [0, 1]
        gamma: Discount factor in (0, 1)
        actions_per_state: Available action indices for every state
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    actions_per_state: Tuple[Tuple[int, ...], ...]
    mask: np.ndarray = field(init=False, repr=False)
    expected_reward: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=float)
        reward = np.asarray(self.reward, dtype=float)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise MdpValidationError(f"transition must have shape (S, A, S), got {transition.shape}")
        if reward.shape != transition.shape:
            raise MdpValidationError(
                f"reward shape {reward.shape} does not match transition shape {transition.shape}"
            )
        n_states, n_actions, _ = transition.shape
        if not 0.0 < float(self.gamma) < 1.0:
            raise MdpValidationError(f"gamma must lie in (0, 1), got {self.gamma}")
        if len(self.actions_per_state) != n_states:
            raise MdpValidationError(
                f"actions_per_state lists {len(self.actions_per_state)} states, expected {n_states}"
            )

        actions = tuple(tuple(sorted(int(a) for a in acts)) for acts in self.actions_per_state)
        mask = np.zeros((n_states, n_actions), dtype=bool)
        for s, acts in enumerate(actions):
            if not acts:
                raise MdpValidationError(f"state {s} has no available action")
            if len(set(acts)) != len(acts):
                raise MdpValidationError(f"state {s} lists a duplicate action")
            for a in acts:
                if not 0 <= a < n_actions:
                    raise MdpValidationError(f"state {s} lists action {a} outside 0..{n_actions - 1}")
                mask[s, a] = True

        if not np.all(np.isfinite(transition)) or not np.all(np.isfinite(reward)):
            raise MdpValidationError("transition and reward must be finite")
        if np.any(transition < 0.0):
            s, a, sp = np.argwhere(transition < 0.0)[0]
            raise MdpValidationError(f"negative transition probability at ({s},{a},{sp})")
        sums = transition.sum(axis=2)
        bad = mask & (np.abs(sums - 1.0) > PROB_TOL)
        if np.any(bad):
            s, a = np.argwhere(bad)[0]
            raise MdpValidationError(f"transition row ({s},{a}) sums to {sums[s, a]!r}, not 1")
        if np.any(reward < 0.0) or np.any(reward > 1.0):
            s, a, sp = np.argwhere((reward < 0.0) | (reward > 1.0))[0]
            raise MdpValidationError(f"reward at ({s},{a},{sp}) is {reward[s, a, sp]!r}, outside [0, 1]")

        # unavailable pairs carry no dynamics
        transition = np.where(mask[:, :, None], transition, 0.0)
        reward = np.where(mask[:, :, None], reward, 0.0)

        object.__setattr__(self, "transition", _frozen(transition))
        object.__setattr__(self, "reward", _frozen(reward))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "actions_per_state", actions)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(
            self,
            "expected_reward",
            _frozen(np.einsum("sap,sap->sa", transition, reward)),
        )

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def v_max(self) -> float:
        return 1.0 / (1.0 - self.gamma)

    @property
    def s_prime(self) -> Tuple[int, ...]:
        """States with more than one available action"""
        return tuple(s for s, acts in enumerate(self.actions_per_state) if len(acts) > 1)

    @property
    def n_pairs(self) -> int:
        return int(self.mask.sum())

    def pairs(self) -> List[Tuple[int, int]]:
        """All available (s, a) pairs in index order"""
        return [(s, a) for s, acts in enumerate(self.actions_per_state) for a in acts]

    def pair_index(self, s: int, a: int) -> int:
        return s * self.n_actions + a

    def same_structure(self, other: "Mdp") -> bool:
        return (
            self.transition.shape == other.transition.shape
            and self.actions_per_state == other.actions_per_state
            and self.gamma == other.gamma
        )


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """State values V(s)"""

    values: np.ndarray
    gamma: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise MdpValidationError("value function must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise MdpValidationError("value function must be finite")
        v_max = 1.0 / (1.0 - self.gamma)
        if np.any(values < -VALUE_SLACK) or np.any(values > v_max + VALUE_SLACK):
            raise MdpValidationError(f"values must lie in [0, {v_max}]")
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class QFunction:
    """
    Action values Q(s, a). Unavailable entries hold ``-inf``.
    """

    values: np.ndarray
    mask: np.ndarray
    gamma: float

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool, copy=True)
        values = np.asarray(self.values, dtype=float)
        if values.shape != mask.shape:
            raise MdpValidationError(f"Q shape {values.shape} does not match mask shape {mask.shape}")
        available = values[mask]
        if not np.all(np.isfinite(available)):
            raise MdpValidationError("Q must be finite on available pairs")
        v_max = 1.0 / (1.0 - self.gamma)
        if np.any(available < -VALUE_SLACK) or np.any(available > v_max + VALUE_SLACK):
            raise MdpValidationError(f"Q values must lie in [0, {v_max}]")
        values = np.where(mask, values, -np.inf)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def zeros(cls, mdp: Mdp) -> "QFunction":
        return cls(values=np.zeros(mdp.mask.shape), mask=mdp.mask, gamma=mdp.gamma)

    def state_values(self) -> np.ndarray:
        return self.values.max(axis=1)

    def greedy(self) -> "Policy":
        """Greedy policy; np.argmax breaks ties toward the lowest action index"""
        return Policy(actions=np.argmax(self.values, axis=1))


@dataclass(frozen=True, eq=False)
class Policy:
    """Deterministic policy, one action index per state"""

    actions: np.ndarray

    def __post_init__(self):
        actions = np.array(self.actions, dtype=int, copy=True)
        if actions.ndim != 1:
            raise MdpValidationError("policy must map every state to one action")
        actions.setflags(write=False)
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, s: int) -> int:
        return int(self.actions[s])

    def validate_for(self, mdp: Mdp) -> None:
        if len(self.actions) != mdp.n_states:
            raise MdpValidationError(
                f"policy covers {len(self.actions)} states, MDP has {mdp.n_states}"
            )
        for s, a in enumerate(self.actions):
            if not (0 <= a < mdp.n_actions and mdp.mask[s, a]):
                raise MdpValidationError(f"policy picks unavailable action {a} at state {s}")


@dataclass(frozen=True)
class CandidateSets:
    """
    Per-state potential-optimal action sets for a threshold c.

    ``total_count`` sums the set sizes over states with more than one
    available action; ``full_count`` sums over every state.
    """

    threshold: float
    sets: Tuple[Tuple[int, ...], ...]
    s_prime: Tuple[int, ...]

    def __post_init__(self):
        for s, acts in enumerate(self.sets):
            if not acts:
                raise MdpValidationError(f"candidate set of state {s} is empty")

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(acts) for acts in self.sets)

    @property
    def total_count(self) -> int:
        return sum(len(self.sets[s]) for s in self.s_prime)

    @property
    def full_count(self) -> int:
        return sum(len(acts) for acts in self.sets)

    def contains(self, other: "CandidateSets") -> bool:
        """True if every per-state set of ``other`` is a subset of this one"""
        return all(set(b) <= set(a) for a, b in zip(self.sets, other.sets))
