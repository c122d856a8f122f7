from fastapi import APIRouter, status

from config.settings import get_settings

VERSION = "0.1.0"

router = APIRouter(prefix="/health", tags=["Health"])


@router.get("", status_code=status.HTTP_200_OK)
async def health_check():
    """Health check endpoint to verify service status."""
    settings = get_settings()
    return {
        "status": "ok",
        "version": VERSION,
        "service": "transfer-mdp",
        "planning_tol": settings.planning_tol,
        "output_dir": str(settings.output_dir),
    }
