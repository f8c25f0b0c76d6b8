from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from app import commands
from app.config import get_settings
from app.errors import SingularMatrixError, TransistorError
from app.logging_config import setup_logging, get_logger
from app.schemas import RunConfig
from app.writers import to_jsonable

# Initialize centralized logging
setup_logging(service_name="api")
logger = get_logger(__name__)

app = FastAPI(
    title="Quantum Transistor Simulator API",
    description="Coupler-controlled iSWAP simulations, fits and process tomography",
    version="1.0.0",
)


def _table(frame) -> list:
    return to_jsonable(frame.to_dict(orient="records"))


def _run(name: str, job):
    """Run one experiment and map domain errors to HTTP errors."""
    logger.info("Experiment request: %s", name)
    try:
        result = job()
    except SingularMatrixError as e:
        logger.warning("Singular readout matrix in %s: %s", name, e)
        raise HTTPException(status_code=422, detail=str(e))
    except (TransistorError, ValueError) as e:
        logger.warning("Rejected %s request: %s", name, e)
        raise HTTPException(status_code=400, detail=str(e))
    logger.info("Experiment finished: %s", name)
    return JSONResponse(to_jsonable(result))


@app.post("/chevron")
def chevron(config: RunConfig = RunConfig()):
    """
    Q2 -> Q1 transfer versus coupler frequency and interaction time
    """

    def job():
        table, fits = commands.chevron(config)
        return {"table": _table(table), "fits": fits}

    return _run("chevron", job)


@app.post("/coupling-curve")
def coupling_curve(config: RunConfig = RunConfig()):
    """
    Fitted and closed-form |2g|/2pi versus detuning for both coupler states
    """
    return _run("coupling-curve", lambda: {"table": _table(commands.coupling_curve(config))})


@app.post("/transistor")
def transistor(config: RunConfig = RunConfig()):
    """
    Open- and closed-gate population traces with summaries
    """

    def job():
        runs = commands.transistor(config)
        return {gate: {"table": _table(run.table), "summary": run.summary} for gate, run in runs.items()}

    return _run("transistor", job)


@app.post("/qpt")
def qpt(config: RunConfig = RunConfig()):
    """
    Process tomography of the open and/or closed gate

    Raw shot records are not returned; use the CLI to keep them.
    """
    return _run("qpt", lambda: commands.qpt(config)[0])


@app.post("/readout-cal")
def readout_cal(config: RunConfig = RunConfig()):
    """
    Readout transfer matrix, its inverse and a correction round trip
    """
    return _run("readout-cal", lambda: commands.readout_calibration(config))


@app.post("/dephasing-sweep")
def dephasing_sweep(config: RunConfig = RunConfig()):
    """
    Peak transfer and blockade versus coupler dephasing rate
    """
    return _run("dephasing-sweep", lambda: {"table": _table(commands.dephasing(config))})


@app.get("/")
def root():
    """Root endpoint"""
    return {"status": "ok", "message": "Quantum transistor simulator API is running"}


@app.get("/health")
def health_check():
    """
    Health check with log directory verification
    """
    settings = get_settings()
    health_status = {"status": "healthy", "api": "ok", "log_dir": "unknown"}

    try:
        if settings.log_dir.exists() and settings.log_dir.is_dir():
            health_status["log_dir"] = "ok"
            logger.debug("Log directory health check: OK")
        else:
            health_status["log_dir"] = "not found"
            health_status["status"] = "degraded"
            logger.warning("Log directory not found: %s", settings.log_dir)
    except OSError as e:
        health_status["log_dir"] = f"error: {str(e)}"
        health_status["status"] = "degraded"
        logger.error("Log directory health check failed: %s", str(e))

    if health_status["status"] != "healthy":
        raise HTTPException(status_code=503, detail=health_status)
    return health_status
