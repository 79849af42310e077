"""Environment-driven settings for fusetree.

Settings are read from environment variables, which the CLI populates from a
``.env`` file at import. They tune resources and numerical safeguards only;
every source of randomness is driven by an explicit seed.
"""

import os
from typing import Literal

from pydantic import BaseModel, Field

from fusetree import constants
from fusetree.errors import ConfigError

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]


class Settings(BaseModel):
    """Runtime settings.

    Attributes:
        workers (int): Thread pool size for independent fits
        log_level (str): Logging threshold for the CLI handler
        max_iter (int): IRLS iteration cap
        tolerance (float): IRLS relative deviance change tolerance
    """

    workers: int = Field(default=1, ge=1, description="Thread pool size for independent fits")
    log_level: LogLevel = Field(default="INFO", description="Logging threshold")
    max_iter: int = Field(default=constants.MAX_ITER, ge=1, description="IRLS iteration cap")
    tolerance: float = Field(
        default=constants.DEVIANCE_TOLERANCE, gt=0, description="IRLS relative deviance tolerance"
    )


def load_settings() -> Settings:
    """Build settings from the environment.

    Returns:
        Settings: Validated settings

    Raises:
        ConfigError: When an environment value is not valid
    """
    raw = {
        "workers": os.getenv("FUSETREE_WORKERS"),
        "log_level": os.getenv("FUSETREE_LOG_LEVEL"),
        "max_iter": os.getenv("FUSETREE_MAX_ITER"),
        "tolerance": os.getenv("FUSETREE_TOLERANCE"),
    }
    values = {key: value for key, value in raw.items() if value not in (None, "")}
    if "log_level" in values:
        values["log_level"] = values["log_level"].upper()
    try:
        return Settings(**values)
    except ValueError as e:
        raise ConfigError(f"invalid environment setting: {e}") from e
