import logging
from typing import Any, Dict, Literal

from fastapi import APIRouter, HTTPException, Query

from agents.selector import list_learners
from app.models.api import LearnerListResponse, LearnerMetadata
from app.services.transfer import compute_c_bar

logger = logging.getLogger("api")

router = APIRouter(prefix="/transfer", tags=["transfer"])


@router.get("/c-bar")
async def c_bar(
    beta: float = Query(..., gt=0, description="TV radius of the prior"),
    gamma: float = Query(..., gt=0, lt=1, description="Discount factor"),
    eps: float = Query(..., gt=0, description="Target accuracy"),
    variant: Literal["standard", "strict"] = Query("standard"),
) -> Dict[str, Any]:
    """Elimination threshold for the given prior radius and accuracy"""
    try:
        value = compute_c_bar(beta, gamma, eps, strict=variant == "strict")
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {"beta": beta, "gamma": gamma, "eps": eps, "variant": variant, "c_bar": value}


@router.get("/learners", response_model=LearnerListResponse)
async def learners():
    """List the available learners"""
    return LearnerListResponse(
        learners=[LearnerMetadata(**meta) for meta in list_learners().values()]
    )
