from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator


class Settings(BaseSettings):
    # API Settings
    API_V1_STR: str = "/api/v1"
    PROJECT_NAME: str = "BQML Simulator"

    # Logging
    LOG_LEVEL: str = Field(
        default="INFO",
        description="Root log level for the CLI, the API and the workers"
    )
    LOG_FORMAT: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="logging.basicConfig format string"
    )

    # Numerical settings
    NORM_TOLERANCE: float = Field(
        default=1e-10,
        description="Tolerance for normalization and unitarity checks"
    )
    MAX_QUBITS: int = Field(
        default=12,
        description="Largest joint state the core will build"
    )

    # Protocol defaults
    DEFAULT_CI_LEVEL: float = 0.95
    DEFAULT_TIE_EPSILON: float = 1e-9
    DEFAULT_CHECK_THRESHOLD: float = 0.0  # any mismatch aborts in noiseless mode
    CONTROL_MONITOR_MIN_SAMPLES: int = Field(
        default=100,
        description="Computational-control trials seen before the Step-5 failure rate is checked on the fly"
    )

    # Experiment runner
    DEFAULT_OUTPUT_DIR: str = "results"
    WORKER_COUNT: int = Field(
        default=1,
        description="Worker processes used for parallel repetitions (1 runs in-process)"
    )
    MIN_REPETITIONS_PER_BATCH: int = 1

    # HTTP limits: the API runs experiments synchronously
    API_MAX_REPETITIONS: int = 100
    API_MAX_SHOTS: int = 100_000

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Accept only the standard logging level names."""
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return level

    @field_validator("WORKER_COUNT", "MAX_QUBITS", "CONTROL_MONITOR_MIN_SAMPLES")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    model_config = SettingsConfigDict(env_file=".env", env_prefix="BQML_", extra="ignore")


settings = Settings()
