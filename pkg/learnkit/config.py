"""Configuration management for learnkit."""

import os
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator

# Load environment variables from .env file
load_dotenv()

DEFAULT_BOX_C = 1000.0
DEFAULT_SVM_TOL = 1e-8
DEFAULT_SV_TOLERANCE = 1e-6
DEFAULT_MAX_ITER = 100_000
DEFAULT_CONFIDENCE_LEVEL = 0.95
DEFAULT_SMOOTHING = 1.0
DEFAULT_MAX_JOINT_STATES = 1_000_000
DEFAULT_LOG_LOSS_CAP = 35.0

ENV_PREFIX = "LEARNKIT_"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Config(BaseModel):
    """Validated toolkit settings.

    Defaults apply when neither the environment nor a YAML file overrides
    them, so no variable is required.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    log_level: str = "INFO"

    # SVM solver
    box_c: float = Field(DEFAULT_BOX_C, gt=0)
    svm_tol: float = Field(DEFAULT_SVM_TOL, gt=0)
    sv_tolerance: float = Field(DEFAULT_SV_TOLERANCE, gt=0)
    max_iter: int = Field(DEFAULT_MAX_ITER, ge=1)

    # Tabular learners
    confidence_level: float = Field(DEFAULT_CONFIDENCE_LEVEL, gt=0, lt=1)
    smoothing: float = Field(DEFAULT_SMOOTHING, ge=0)

    # Transduction
    workers: int = Field(1, ge=1)

    # Belief networks and expert aggregation
    max_joint_states: int = Field(DEFAULT_MAX_JOINT_STATES, ge=1)
    log_loss_cap: float = Field(DEFAULT_LOG_LOSS_CAP, gt=0)

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"Unknown log level: {value}")
        return level

    @classmethod
    def from_env(cls, environ: Optional[dict[str, str]] = None) -> "Config":
        """Build a configuration from ``LEARNKIT_*`` environment variables."""
        environ = os.environ if environ is None else environ
        values: dict[str, Any] = {}
        for name in cls.model_fields:
            raw = environ.get(f"{ENV_PREFIX}{name.upper()}")
            if raw is not None and raw != "":
                values[name] = raw
        return cls(**values)

    @classmethod
    def from_yaml(
        cls, path: Union[str, Path], base: Optional["Config"] = None
    ) -> "Config":
        """Overlay the settings of a YAML mapping onto ``base``.

        Args:
            path: YAML file holding a mapping of setting names to values
            base: Settings to start from (environment defaults when omitted)

        Returns:
            New validated Config

        Raises:
            ValueError: If the file does not hold a mapping
        """
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}

        if not isinstance(data, dict):
            raise ValueError(f"Invalid config file {path}: expected a mapping")

        base = base or cls.from_env()
        merged = base.model_dump()
        merged.update({str(key).replace("-", "_"): value for key, value in data.items()})
        return cls(**merged)
