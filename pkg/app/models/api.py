from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class SolveRequest(BaseModel):
    """MDP document plus planning tolerance"""

    mdp: Dict[str, Any]
    tol: float = Field(default=1e-9, gt=0)


class TvDistanceRequest(BaseModel):
    m0: Dict[str, Any]
    m: Dict[str, Any]


class CurvesRequest(BaseModel):
    betas: List[float] = Field(min_length=1)
    gammas: List[float] = Field(min_length=1)
    eps_values: Optional[List[float]] = None
    eps_ratio: float = Field(default=0.5, gt=0, lt=1)


class ValidateResponse(BaseModel):
    valid: bool
    n_states: int
    n_pairs: int
    s_prime: List[int]


class SolveResponse(BaseModel):
    values: List[float]
    q_values: List[Dict[str, float]]
    policy: List[int]


class LearnerMetadata(BaseModel):
    learner_id: str
    name: str
    description: str


class LearnerListResponse(BaseModel):
    learners: List[LearnerMetadata]
