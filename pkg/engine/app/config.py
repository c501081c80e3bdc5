from typing import Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()


class Settings(BaseSettings):
    # Neighbourhood radii (meters)
    RADIUS: float = 0.03
    EDGE_RADIUS: float = 0.006
    NORMAL_RADIUS: Optional[float] = None
    MIN_NEIGHBORS: int = 5

    # INAD / shape histogram
    OUTLIER_RATE: float = 1.0
    BINS_MU: int = 10
    BINS_SIGMA: int = 10
    MU_MAX: float = 90.0
    SIGMA_MAX: float = 45.0
    THRESHOLD: float = 0.5

    # RANSAC baseline
    RANSAC_ITERATIONS: int = 1000
    RANSAC_THRESHOLD: float = 0.002

    # Execution
    THREADS: int = 1
    CHUNK_SIZE: int = 4096
    SEED: int = 0
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(env_file=".env", env_prefix="SBP_", extra="ignore")


settings = Settings()
