from dotenv import load_dotenv
import os
from pydantic import BaseModel

load_dotenv(override=True)


class Config(BaseModel):
    # Runtime
    NUDGE_NSE_JOBS: int = int(os.getenv("NUDGE_NSE_JOBS", os.cpu_count() or 1))
    LOG_DIR: str = os.getenv("NUDGE_NSE_LOG_DIR", "logs")
    LOG_LEVEL: str = os.getenv("NUDGE_NSE_LOG_LEVEL", "INFO")
    OUTPUT_DIR: str = os.getenv(
        "NUDGE_NSE_OUTPUT_DIR", os.path.join(os.path.dirname(__file__), "runs")
    )

    # Solver guards
    BLOWUP_GROWTH_FACTOR: float = 1e6
    CFL_LIMIT: float = 0.5
    NUDGING_EXPLICIT_GUARD: float = 0.5
    DIV_FREE_TOL: float = 1e-12
    SPINUP_MAX_WINDOWS: int = 200
    SPINUP_H1_FLOOR: float = 1e-6

    # Determining maps
    FORGETTING_TOL: float = 1e-12
    BURN_IN_SAFETY: float = 1.5
    BISECTION_RTOL: float = 1e-6
    BETA_RANGE: tuple[float, float] = (1e-6, 1e12)

    # Ensembles and transport
    EXACT_ASSIGNMENT_MAX_ATOMS: int = 128
    ENTROPIC_REG: float = 1e-2
    METRIC_N_MAX: int = 20

    # Persistence
    SNAPSHOT_VERSION: int = 1


config = Config()
