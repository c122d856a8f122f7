import logging
import os
from functools import lru_cache
from pathlib import Path
from typing import List

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Load environment variables from .env file
dotenv_path = Path(__file__).resolve().parent.parent / ".env"
if dotenv_path.exists():
    load_dotenv(dotenv_path=dotenv_path)


class Settings(BaseModel):
    """Process-wide settings read from the environment"""

    output_dir: Path = Path("results")
    log_level: str = "INFO"
    workers: int = Field(default=1, ge=1)
    planning_tol: float = Field(default=1e-9, gt=0)
    debug_transcripts: bool = False
    cors_origins: List[str] = Field(default_factory=lambda: ["http://localhost:3000"])


def _env_flag(name: str) -> bool:
    return os.getenv(name, "").strip().lower() in {"1", "true", "yes", "on"}


def _env_list(name: str, default: str) -> List[str]:
    return [item.strip() for item in os.getenv(name, default).split(",") if item.strip()]


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Read settings once; call ``get_settings.cache_clear()`` after changing the environment"""
    settings = Settings(
        output_dir=Path(os.getenv("TRANSFER_MDP_OUTPUT_DIR", "results")),
        log_level=os.getenv("TRANSFER_MDP_LOG_LEVEL", "INFO").upper(),
        workers=int(os.getenv("TRANSFER_MDP_WORKERS", "1")),
        planning_tol=float(os.getenv("TRANSFER_MDP_PLANNING_TOL", "1e-9")),
        debug_transcripts=_env_flag("TRANSFER_MDP_DEBUG_TRANSCRIPTS"),
        cors_origins=_env_list("TRANSFER_MDP_CORS_ORIGINS", "http://localhost:3000"),
    )
    logging.getLogger("settings").debug(f"settings: {settings}")
    return settings
