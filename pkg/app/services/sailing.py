"""
Grid sailing benchmark.

The boat moves in one of eight compass directions on a width x height
grid (row 0 is the northern edge). The wind blows from one of n_winds
directions and is part of the state; heading straight into it, or off
the grid, leaves the boat in place. Every step the wind shifts to a
neighbouring direction with probability ``wind_change_prob``. Entering
the goal cell pays 1; goal states are absorbing and pay nothing after.
"""

import logging
from typing import Tuple

import numpy as np

from app.models.configs import SailingInstance
from app.models.mdp import Mdp

logger = logging.getLogger("sailing")

# N, NE, E, SE, S, SW, W, NW as (dx, dy) with y growing southwards
HEADINGS: Tuple[Tuple[int, int], ...] = (
    (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1),
)
HEADING_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")


def state_index(inst: SailingInstance, x: int, y: int, w: int) -> int:
    return (y * inst.width + x) * inst.n_winds + w


def wind_heading(inst: SailingInstance, w: int) -> int:
    """Compass heading the wind blows from"""
    return (w * len(HEADINGS)) // inst.n_winds


def _wind_kernel(inst: SailingInstance, rng: np.random.Generator) -> np.ndarray:
    """n_winds x n_winds wind-shift matrix; the clockwise share of each shift is seeded"""
    n = inst.n_winds
    kernel = np.eye(n)
    if n == 1 or inst.wind_change_prob == 0.0:
        return kernel
    p = inst.wind_change_prob
    for w in range(n):
        share = rng.uniform()
        kernel[w, w] = 1.0 - p
        kernel[w, (w + 1) % n] += p * share
        kernel[w, (w - 1) % n] += p * (1.0 - share)
    return kernel


def make_sailing(inst: SailingInstance, seed: int = 0) -> Mdp:
    """
    Build the sailing MDP.

    Args:
        inst: Grid, wind and discount settings
        seed: Seed for the wind-shift split

    Returns:
        Mdp with width * height * n_winds states and 8 actions everywhere
    """
    rng = np.random.default_rng(seed)
    wind = _wind_kernel(inst, rng)
    W, H, n_winds = inst.width, inst.height, inst.n_winds
    n_states = W * H * n_winds
    n_actions = len(HEADINGS)
    transition = np.zeros((n_states, n_actions, n_states))
    reward = np.zeros_like(transition)
    gx, gy = inst.goal

    for y in range(H):
        for x in range(W):
            for w in range(n_winds):
                s = state_index(inst, x, y, w)
                if (x, y) == (gx, gy):
                    transition[s, :, s] = 1.0
                    continue
                blocked = wind_heading(inst, w)
                for a, (dx, dy) in enumerate(HEADINGS):
                    nx, ny = x + dx, y + dy
                    if a == blocked or not (0 <= nx < W and 0 <= ny < H):
                        nx, ny = x, y
                    for w_next in range(n_winds):
                        p = wind[w, w_next]
                        if p == 0.0:
                            continue
                        s_next = state_index(inst, nx, ny, w_next)
                        transition[s, a, s_next] += p
                        if (nx, ny) == (gx, gy):
                            reward[s, a, s_next] = 1.0

    actions = tuple(tuple(range(n_actions)) for _ in range(n_states))
    mdp = Mdp(transition=transition, reward=reward, gamma=inst.gamma, actions_per_state=actions)
    winds = ", ".join(HEADING_NAMES[wind_heading(inst, w)] for w in range(n_winds))
    logger.debug(f"built {W}x{H} sailing MDP with winds from {winds} ({n_states} states)")
    return mdp
