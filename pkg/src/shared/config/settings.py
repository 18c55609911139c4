from pathlib import Path
from functools import lru_cache
from pydantic_settings import BaseSettings
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    """Toolkit settings.

    Runtime knobs only. Experiment parameters live in the per-experiment
    JSON document, never here.
    """
    # Environment
    ENV: str = "development"  # Options: "development", "testing", "production"
    DEBUG: bool = False

    # Application paths
    APP_DIR: Path = Path(__file__).parent.parent.parent.parent
    OUTPUT_ROOT_DIR: Path = APP_DIR / "results"

    # Directory Names
    LOGS_DIR_NAME: str = "logs"

    # Log File Configuration
    LOG_FILENAME: str = "ipgd_lab.log"
    LOG_LEVEL: str = "INFO"
    LOG_TO_FILE: bool = True

    # Trial execution
    TRIAL_MAX_WORKERS: int = 4
    MONTE_CARLO_BLOCK_SIZE: int = 1000
    ENABLE_MEMORY_MONITORING: bool = True

    # Numerical limits
    RHO_ENUMERATION_LIMIT: int = 1_000_000
    NUMERIC_TOLERANCE: float = 1e-12
    TRACE_STORE_EVERY: int = 1
    ISTA_STEP_WARNING: bool = True

    # Application Information
    APP_NAME: str = "ipgd-lab"
    APP_VERSION: str = "1.0.0"

    class Config:
        env_prefix = "IPGD_"
        use_enum_values = True

    def setup_directories(self):
        """Create necessary directories if they don't exist."""
        for path in [self.OUTPUT_ROOT_DIR, Path(self.LOGS_DIR_NAME)]:
            path.mkdir(parents=True, exist_ok=True)


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
