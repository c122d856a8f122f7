from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

GAMMA_FLOOR = 0.4


def hardcase_gamma_range(beta: float) -> Tuple[float, float]:
    """Open interval of admissible discounts for the hard-case family"""
    return max(GAMMA_FLOOR, 1.0 - 10.0 * beta), 1.0


def hardcase_p0_floor(gamma: float) -> float:
    """(4γ-1)/(3γ), the smallest admissible leading prior probability"""
    return (4.0 * gamma - 1.0) / (3.0 * gamma)


class LearnerConfig(BaseModel):
    """Accuracy, confidence and budget settings shared by the learners"""

    eps: float = Field(gt=0)
    delta: float = Field(default=0.05, gt=0, lt=1)
    budget_scale: float = Field(default=1.0, gt=0)
    samples_per_pair: Optional[int] = Field(default=None, ge=0)
    max_iters: int = Field(default=200, ge=1)
    step_h: float = Field(default=50.0, gt=0)
    workers: int = Field(default=1, ge=1)


class TransferConfig(BaseModel):
    """Inputs of the action-elimination transfer pipeline"""

    beta: float = Field(gt=0)
    eps: float = Field(gt=0)
    delta: float = Field(default=0.05, gt=0, lt=1)
    budget_scale: float = Field(default=1.0, gt=0)
    samples_per_pair: Optional[int] = Field(default=None, ge=0)
    threshold_variant: Literal["standard", "strict"] = "standard"
    workers: int = Field(default=1, ge=1)

    def learner_config(self) -> LearnerConfig:
        """Learner settings at half the target accuracy"""
        return LearnerConfig(
            eps=self.eps / 2.0,
            delta=self.delta,
            budget_scale=self.budget_scale,
            samples_per_pair=self.samples_per_pair,
            workers=self.workers,
        )


class HardCaseParams(BaseModel):
    """
    Prior of the lower-bound family: K decision states with L actions each,
    leading self-loop probabilities p0 (rows sorted nonincreasing).
    """

    beta: float = Field(gt=0, lt=2)
    gamma: float = Field(gt=0, lt=1)
    eps: float = Field(gt=0)
    p0: List[List[float]]
    K: Optional[int] = Field(default=None, ge=1)
    L: Optional[int] = Field(default=None, ge=1)

    @field_validator("p0")
    @classmethod
    def rows_nonempty(cls, p0: List[List[float]]) -> List[List[float]]:
        if not p0 or any(len(row) == 0 for row in p0):
            raise ValueError("p0 must have at least one nonempty row")
        if len({len(row) for row in p0}) != 1:
            raise ValueError("every p0 row must list the same number of actions")
        return p0

    @model_validator(mode="after")
    def check_domain(self) -> "HardCaseParams":
        k, l = len(self.p0), len(self.p0[0])
        if self.K is None:
            self.K = k
        if self.L is None:
            self.L = l
        if (self.K, self.L) != (k, l):
            raise ValueError(f"p0 has shape {k}x{l}, expected K={self.K}, L={self.L}")
        low, high = hardcase_gamma_range(self.beta)
        if not low < self.gamma < high:
            raise ValueError(f"gamma must lie in ({low:.6g}, 1) for beta={self.beta}")
        floor = hardcase_p0_floor(self.gamma)
        for i, row in enumerate(self.p0):
            if any(b > a for a, b in zip(row, row[1:])):
                raise ValueError(f"p0 row {i} must be nonincreasing")
            if row[-1] < 0.0:
                raise ValueError(f"p0 row {i} has a negative entry")
            if not floor < row[0] < 1.0:
                raise ValueError(f"p0[{i}][0]={row[0]} must lie in ({floor:.6g}, 1)")
        return self


class SailingInstance(BaseModel):
    """Grid sailing task with the wind direction as part of the state"""

    width: int = Field(default=4, ge=2)
    height: int = Field(default=4, ge=2)
    n_winds: int = Field(default=4, ge=1, le=8)
    wind_change_prob: float = Field(default=0.3, ge=0, le=1)
    goal: Optional[Tuple[int, int]] = None
    gamma: float = Field(default=0.9, gt=0, lt=1)

    @model_validator(mode="after")
    def check_goal(self) -> "SailingInstance":
        if self.goal is None:
            self.goal = (self.width - 1, self.height - 1)
        x, y = self.goal
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"goal {self.goal} lies outside the {self.width}x{self.height} grid")
        return self


ExperimentKind = Literal["transfer-sweep", "hardcase-figures", "warmstart", "hull-sweep", "bound-sweep"]


class ExperimentConfig(BaseModel):
    """One experiment, fully specified by a TOML file"""

    kind: ExperimentKind
    name: str = Field(min_length=1)
    seeds: List[int] = Field(min_length=1)
    budget_scales: List[float] = Field(default_factory=lambda: [1.0])
    output_dir: Path = Path("results")
    workers: Optional[int] = Field(default=None, ge=1)
    params: Dict[str, Any] = Field(default_factory=dict)
    acceptance: Dict[str, float] = Field(default_factory=dict)

    @field_validator("seeds", mode="before")
    @classmethod
    def expand_seed_range(cls, seeds: Any) -> Any:
        """Accept ``{ start = 0, count = 200 }`` as shorthand for a seed list"""
        if isinstance(seeds, dict):
            try:
                start, count = int(seeds.get("start", 0)), int(seeds["count"])
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError("a seed range needs an integer count") from e
            return list(range(start, start + count))
        return seeds

    @field_validator("budget_scales")
    @classmethod
    def positive_scales(cls, scales: List[float]) -> List[float]:
        if not scales or any(s <= 0 for s in scales):
            raise ValueError("budget_scales must be a nonempty list of positive numbers")
        return scales
