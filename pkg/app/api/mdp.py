import logging
from typing import Any, Dict

from fastapi import APIRouter, HTTPException

from app.models.api import (SolveRequest, SolveResponse, TvDistanceRequest,
                            ValidateResponse)
from app.services.planning import tv_distance, value_iteration
from app.utils.errors import MdpValidationError, TransferMdpError
from app.utils.mdp_io import mdp_from_document

logger = logging.getLogger("api")

router = APIRouter(prefix="/mdp", tags=["mdp"])


def _diagnostic_detail(e: MdpValidationError) -> Dict[str, Any]:
    return {
        "message": str(e),
        "diagnostics": [{"line": line, "message": msg} for line, msg in e.diagnostics],
    }


@router.post("/validate", response_model=ValidateResponse)
async def validate_mdp(document: Dict[str, Any]):
    """
    Validate an MDP document

    Returns:
        Size summary of the MDP, or 400 with diagnostics
    """
    try:
        mdp = mdp_from_document(document)
    except MdpValidationError as e:
        logger.info(f"rejected MDP document: {e}")
        raise HTTPException(status_code=400, detail=_diagnostic_detail(e))
    return ValidateResponse(valid=True, n_states=mdp.n_states, n_pairs=mdp.n_pairs, s_prime=list(mdp.s_prime))


@router.post("/solve", response_model=SolveResponse)
async def solve_mdp(request: SolveRequest):
    """Plan on an MDP document: V*, Q* on available pairs, greedy policy"""
    try:
        mdp = mdp_from_document(request.mdp)
        v, q, policy = value_iteration(mdp, tol=request.tol)
    except MdpValidationError as e:
        raise HTTPException(status_code=400, detail=_diagnostic_detail(e))
    except TransferMdpError as e:
        logger.error(f"planning failed: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error solving MDP: {e}")
        raise HTTPException(status_code=500, detail=f"Failed to solve MDP: {str(e)}")
    q_values = [
        {str(a): float(q.values[s, a]) for a in acts}
        for s, acts in enumerate(mdp.actions_per_state)
    ]
    return SolveResponse(values=v.values.tolist(), q_values=q_values, policy=policy.actions.tolist())


@router.post("/tv-distance")
async def mdp_tv_distance(request: TvDistanceRequest) -> Dict[str, float]:
    """Total-variation distance between two MDP documents"""
    try:
        distance = tv_distance(mdp_from_document(request.m0), mdp_from_document(request.m))
    except MdpValidationError as e:
        raise HTTPException(status_code=400, detail=_diagnostic_detail(e))
    except TransferMdpError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {"tv_distance": distance}
