import logging
from typing import Any, Dict

from fastapi import APIRouter, HTTPException

from app.models.api import CurvesRequest
from app.models.configs import HardCaseParams
from app.services.hardcase import (build_family, lower_bound_curves, separation_check,
                                   threshold_report, verify_ball_membership)
from app.utils.errors import ParameterDomainError, TransferMdpError
from app.utils.output import to_jsonable

logger = logging.getLogger("api")

router = APIRouter(prefix="/hardcase", tags=["hardcase"])


@router.post("/derive")
async def derive(params: HardCaseParams) -> Dict[str, Any]:
    """
    Derive, build and check the lower-bound family

    Args:
        params: Family parameters

    Returns:
        Derived quantities, ball membership, separation margins and thresholds
    """
    try:
        fam = build_family(params)
        separation = separation_check(fam)
        return to_jsonable({
            "derived": fam.derived.as_dict(),
            "n_hypotheses": fam.n_hypotheses,
            "ball_membership": verify_ball_membership(fam),
            "separation": {"passed": separation.passed, "margins": separation.rows()},
            "thresholds": threshold_report(fam),
        })
    except ParameterDomainError as e:
        raise HTTPException(status_code=400, detail={"message": str(e), "constraint": e.constraint})
    except TransferMdpError as e:
        logger.error(f"Error building hard-case family: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/curves")
async def curves(request: CurvesRequest) -> Dict[str, Any]:
    """Closed-form threshold table over a β × γ grid"""
    try:
        rows = lower_bound_curves(request.betas, request.gammas, request.eps_values, request.eps_ratio)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {"rows": to_jsonable(rows), "count": len(rows)}
