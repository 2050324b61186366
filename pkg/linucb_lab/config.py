from pydantic_settings import BaseSettings
from typing import Optional, Literal


class Settings(BaseSettings):
    # Application Settings
    APP_NAME: str = "linucb-lab"
    OUTPUT_DIR: str = "results"

    # Parallelism (LINUCB_LAB_THREADS wins over any configured value)
    LINUCB_LAB_THREADS: Optional[int] = None

    # Run outputs
    RECORD_WALLCLOCK: bool = False  # wall_us stays 0 so identical runs give identical CSVs

    # Sweep execution backend
    SWEEP_BACKEND: Literal["local", "celery"] = "local"

    # Celery Configuration
    CELERY_BROKER_URL: str = "redis://localhost:6379/0"
    CELERY_RESULT_BACKEND: str = "redis://localhost:6379/0"
    CELERY_TASK_ALWAYS_EAGER: bool = False
    CELERY_TIMEZONE: str = 'UTC'
    SWEEP_JOB_TIMEOUT: int = 3600  # seconds per seed job

    # Logging Configuration
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: Literal["console", "json"] = "console"

    class Config:
        env_file = ".env"
        env_file_encoding = 'utf-8'
        case_sensitive = True
        extra = 'ignore'

    def resolve_parallelism(self, requested: int) -> int:
        """Worker count for a sweep: LINUCB_LAB_THREADS overrides the request"""
        if self.LINUCB_LAB_THREADS is not None:
            return max(1, int(self.LINUCB_LAB_THREADS))
        return max(1, int(requested))

    def is_distributed(self) -> bool:
        """Check if sweeps are dispatched to Celery workers"""
        return self.SWEEP_BACKEND == "celery"


# Global settings instance
settings = Settings()
