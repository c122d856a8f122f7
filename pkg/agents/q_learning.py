"""
Synchronous tabular Q-learning with generative samples.

Each sweep draws one sample for every available pair and applies
Q <- (1 - η_t) Q + η_t (r + γ max_a' Q(s', a')) with η_t = h / (h + t).
"""

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np

from agents.base import Learner
from app.models.configs import LearnerConfig
from app.models.mdp import Mdp, QFunction
from app.services.planning import policy_evaluation_exact
from app.services.sampling import GenerativeModel


@dataclass
class CurvePoint:
    """Exact value of the greedy policy at one checkpoint"""

    sweep: int
    samples_used: int
    min_value: float
    mean_value: float


@dataclass
class LearningCurve:
    points: List[CurvePoint] = field(default_factory=list)

    def rows(self) -> List[Tuple[int, float, float]]:
        """(samples_used, greedy_policy_min_value, greedy_policy_mean_value) rows"""
        return [(p.samples_used, p.min_value, p.mean_value) for p in self.points]

    @property
    def first(self) -> CurvePoint:
        return self.points[0]

    @property
    def last(self) -> CurvePoint:
        return self.points[-1]


def default_schedule(max_iters: int, n_points: int = 20) -> List[int]:
    step = max(1, max_iters // n_points)
    schedule = list(range(0, max_iters + 1, step))
    if schedule[-1] != max_iters:
        schedule.append(max_iters)
    return schedule


class QLearningAgent(Learner):
    """Synchronous Q-learning, optionally warm-started from a prior Q-function"""

    def __init__(self, **kwargs):
        super().__init__(
            name="Q-Learning Agent",
            learner_id="q_learning",
            description="Synchronous generative-model Q-learning with step size h/(h+t)",
        )

    def run(
        self,
        gm: GenerativeModel,
        init_q: QFunction,
        cfg: LearnerConfig,
        eval_schedule: Optional[Iterable[int]] = None,
        eval_mdp: Optional[Mdp] = None,
    ) -> Tuple[LearningCurve, QFunction]:
        """
        Run ``cfg.max_iters`` synchronous sweeps.

        Args:
            gm: Generative model of the MDP being learned
            init_q: Initial Q-function, shaped like the MDP
            cfg: Learner settings (max_iters, step_h)
            eval_schedule: Sweep indices at which to record the greedy policy's value
            eval_mdp: The true MDP, used only for exact checkpoint evaluation

        Returns:
            (learning curve, final Q-function)
        """
        if init_q.mask.shape != gm.mask.shape or not np.array_equal(init_q.mask, gm.mask):
            raise ValueError("init_q is not shaped like the oracle's MDP")
        schedule = sorted(set(eval_schedule if eval_schedule is not None else default_schedule(cfg.max_iters)))
        checkpoints = set(s for s in schedule if 0 <= s <= cfg.max_iters)

        pairs = gm.pairs()
        s_idx = np.array([s for s, _ in pairs], dtype=np.int64)
        a_idx = np.array([a for _, a in pairs], dtype=np.int64)
        q = np.array(init_q.values)
        curve = LearningCurve()

        def record(sweep: int):
            if eval_mdp is None:
                return
            policy = QFunction(values=q, mask=init_q.mask, gamma=init_q.gamma).greedy()
            values = policy_evaluation_exact(eval_mdp, policy).values
            curve.points.append(
                CurvePoint(
                    sweep=sweep,
                    samples_used=sweep * len(pairs),
                    min_value=float(values.min()),
                    mean_value=float(values.mean()),
                )
            )

        if 0 in checkpoints:
            record(0)
        for t in range(1, cfg.max_iters + 1):
            next_states, rewards = gm.sample_sweep(pairs)
            eta = cfg.step_h / (cfg.step_h + t)
            targets = rewards + gm.gamma * q.max(axis=1)[next_states]
            q[s_idx, a_idx] = (1.0 - eta) * q[s_idx, a_idx] + eta * targets
            if t in checkpoints:
                record(t)

        self.logger.debug(f"ran {cfg.max_iters} sweeps over {len(pairs)} pairs")
        return curve, QFunction(values=q, mask=init_q.mask, gamma=init_q.gamma)


def q_learning(
    gm: GenerativeModel,
    init_q: QFunction,
    cfg: LearnerConfig,
    eval_schedule: Optional[Iterable[int]] = None,
    eval_mdp: Optional[Mdp] = None,
) -> Tuple[LearningCurve, QFunction]:
    return QLearningAgent().run(gm, init_q, cfg, eval_schedule=eval_schedule, eval_mdp=eval_mdp)
