from typing import Optional
from pydantic import BaseSettings, Field, validator

class Settings(BaseSettings):
    # App
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"
    PROJECT_NAME: str = "geofit3d"
    REPORT_SCHEMA: str = "geofit3d/1"
    FLOAT_DIGITS: int = 17

    # Worker pool (GEOFIT_THREADS)
    THREADS: int = Field(1, ge=1)

    # Linear solve
    TIKHONOV_WEIGHT: float = Field(1e-3, ge=0.0)
    PINV_RCOND: float = 1e-10
    SPARSE_BOUND_SIGMAS: float = 2.0
    DENSE_BOUND_SIGMAS: float = 3.0

    # Trust-region solver
    MAX_ITERATIONS: int = 100
    FTOL: float = 1e-10
    GTOL: float = 1e-10
    XTOL: float = 1e-12
    INITIAL_RADIUS: float = 1.0

    # Fitting
    INITIAL_DISTANCE: float = 1.0  # metres
    RESTART_THRESHOLD: float = 5.0  # % interocular
    CONTOUR_MAX_ROUNDS: int = 10
    CONTOUR_PERCENTILE: Optional[float] = 90.0

    @validator("LOG_LEVEL")
    def _upper_level(cls, v):
        return v.upper()

    class Config:
        env_prefix = "GEOFIT_"
        env_file = ".env"

settings = Settings()
