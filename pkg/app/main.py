import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.api.hardcase import router as hardcase_router
from app.api.health import VERSION, router as health_router
from app.api.mdp import router as mdp_router
from app.api.transfer import router as transfer_router
from app.utils.errors import TransferMdpError
from config.settings import get_settings

settings = get_settings()

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.log_level, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
)

# Create FastAPI app
app = FastAPI(
    title="Transfer MDP API",
    description="Planning, candidate-set and lower-bound tools for transfer in reinforcement learning",
    version=VERSION,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(health_router)
app.include_router(mdp_router, prefix="/api/v1")
app.include_router(transfer_router, prefix="/api/v1")
app.include_router(hardcase_router, prefix="/api/v1")


@app.exception_handler(RequestValidationError)
async def request_validation_handler(request: Request, exc: RequestValidationError):
    # Body validation failures map to 400 like the router errors
    return JSONResponse(status_code=400, content={"detail": [{"loc": list(e["loc"]), "msg": e["msg"]} for e in exc.errors()]})


@app.exception_handler(TransferMdpError)
async def toolkit_error_handler(request: Request, exc: TransferMdpError):
    logging.warning(f"Unhandled toolkit error on {request.url.path}: {exc}")
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/")
async def root():
    return {"message": "Welcome to the Transfer MDP API"}


# Middleware to log requests
@app.middleware("http")
async def log_requests(request: Request, call_next):
    path = request.url.path
    method = request.method

    logging.info(f"Request: {method} {path}")

    response = await call_next(request)

    logging.info(f"Response: {method} {path} - Status: {response.status_code}")

    return response
