"""
Generative-model oracle with exact sample accounting.

Every (s, a) pair owns a counter-based random substream (Philox keyed by
the master seed and the pair index), so a pair's draw sequence does not
depend on how calls to other pairs are interleaved.
"""

import csv
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.mdp import Mdp
from app.utils.errors import InvalidActionError

logger = logging.getLogger("sampling")


def _build_cdf(mdp: Mdp) -> np.ndarray:
    cdf = np.cumsum(mdp.transition, axis=2)
    for s, a in mdp.pairs():
        # pin the tail to exactly 1 so round-off never selects a zero-probability state
        last = int(np.flatnonzero(mdp.transition[s, a] > 0.0)[-1])
        cdf[s, a, last:] = 1.0
    return cdf


@dataclass(frozen=True, eq=False)
class SampleBudgetReport:
    """Snapshot of per-pair sample counts"""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if np.any(counts < 0):
            raise ValueError("sample counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def per_state(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def total_over(self, states: Iterable[int]) -> int:
        states = list(states)
        return int(self.counts[states].sum()) if states else 0

    def __sub__(self, other: "SampleBudgetReport") -> "SampleBudgetReport":
        return SampleBudgetReport(counts=self.counts - other.counts)


class GenerativeModel:
    """
    Oracle answering (s, a) -> (s', r(s, a, s')) for a hidden MDP.

    Learners see the structure (state count, action lists, γ) but not the
    dynamics. Calls on distinct pairs may run concurrently; calls on the
    same pair are serialized.

    Args:
        mdp: The underlying MDP
        seed: Master seed
        record_transcript: Keep a (step, s, a, s', r) log for debugging
    """

    def __init__(self, mdp: Mdp, seed: int = 0, record_transcript: bool = False):
        self._mdp = mdp
        self.seed = int(seed)
        self._counts = np.zeros((mdp.n_states, mdp.n_actions), dtype=np.int64)
        self._cdf = _build_cdf(mdp)
        self._streams: Dict[Tuple[int, int], np.random.Generator] = {}
        self._pair_locks = {pair: threading.Lock() for pair in mdp.pairs()}
        self._counter_lock = threading.Lock()
        self._streams_lock = threading.Lock()
        self.record_transcript = record_transcript
        self._transcript: List[Tuple[int, int, int, int, float]] = []

    @property
    def n_states(self) -> int:
        return self._mdp.n_states

    @property
    def n_actions(self) -> int:
        return self._mdp.n_actions

    @property
    def actions_per_state(self) -> Tuple[Tuple[int, ...], ...]:
        return self._mdp.actions_per_state

    @property
    def gamma(self) -> float:
        return self._mdp.gamma

    @property
    def s_prime(self) -> Tuple[int, ...]:
        return self._mdp.s_prime

    @property
    def mask(self) -> np.ndarray:
        return self._mdp.mask

    def pairs(self) -> List[Tuple[int, int]]:
        return self._mdp.pairs()

    def _stream(self, s: int, a: int) -> np.random.Generator:
        with self._streams_lock:
            stream = self._streams.get((s, a))
            if stream is None:
                seq = np.random.SeedSequence(self.seed, spawn_key=(self._mdp.pair_index(s, a),))
                stream = np.random.Generator(np.random.Philox(seq))
                self._streams[(s, a)] = stream
            return stream

    def _check(self, s: int, a: int) -> None:
        if not (0 <= s < self.n_states and 0 <= a < self.n_actions and self._mdp.mask[s, a]):
            raise InvalidActionError(f"action {a} is not available at state {s}")

    def sample_many(self, s: int, a: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Draw ``n`` independent samples from pair (s, a).

        Returns:
            (next_states, rewards) arrays of length n
        """
        s, a, n = int(s), int(a), int(n)
        self._check(s, a)
        if n < 0:
            raise ValueError(f"sample count must be nonnegative, got {n}")
        with self._pair_locks[(s, a)]:
            uniforms = self._stream(s, a).random(n)
            cdf = self._cdf[s, a]
            next_states = np.minimum(np.searchsorted(cdf, uniforms, side="right"), self.n_states - 1)
            rewards = self._mdp.reward[s, a, next_states]
            with self._counter_lock:
                start = int(self._counts.sum())
                self._counts[s, a] += n
                if self.record_transcript:
                    for i, (sp, r) in enumerate(zip(next_states, rewards)):
                        self._transcript.append((start + i, s, a, int(sp), float(r)))
        return next_states, rewards

    def sample(self, s: int, a: int) -> Tuple[int, float]:
        """Draw one (next_state, reward) sample for pair (s, a)"""
        next_states, rewards = self.sample_many(s, a, 1)
        return int(next_states[0]), float(rewards[0])

    def sample_sweep(self, pairs: Sequence[Tuple[int, int]]) -> Tuple[np.ndarray, np.ndarray]:
        """One sample for every listed pair, in order"""
        next_states = np.empty(len(pairs), dtype=np.int64)
        rewards = np.empty(len(pairs))
        for i, (s, a) in enumerate(pairs):
            sp, r = self.sample_many(s, a, 1)
            next_states[i], rewards[i] = sp[0], r[0]
        return next_states, rewards

    def report(self) -> SampleBudgetReport:
        """Consistent snapshot of the counters; does not reset them"""
        with self._counter_lock:
            return SampleBudgetReport(counts=self._counts.copy())

    @property
    def total_samples(self) -> int:
        return self.report().total

    def write_transcript(self, path: Union[str, Path]) -> Path:
        """Dump the recorded transcript as CSV (step, s, a, s', r)"""
        if not self.record_transcript:
            raise RuntimeError("transcript recording is disabled for this oracle")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with self._counter_lock:
            rows = list(self._transcript)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "s", "a", "s_next", "r"])
            writer.writerows(rows)
        logger.debug(f"wrote {len(rows)} transcript rows to {path}")
        return path


def oracle_for(mdp: Mdp, seed: int = 0, record_transcript: Optional[bool] = None) -> GenerativeModel:
    """Build an oracle, taking the transcript flag from settings when not given"""
    if record_transcript is None:
        from config.settings import get_settings

        record_transcript = get_settings().debug_transcripts
    return GenerativeModel(mdp, seed=seed, record_transcript=record_transcript)
