from functools import lru_cache
from pathlib import Path

from pydantic_settings import BaseSettings

PACKAGE_DIR = Path(__file__).resolve().parent.parent  # → sievelab/
DEFAULT_CATALOG = PACKAGE_DIR / "data" / "catalog.json"
DIVISOR_TABLES = PACKAGE_DIR / "data" / "divisor_tables.json"
DEFAULT_LOG_CONFIG = PACKAGE_DIR / "core" / "logging.ini"


class Settings(BaseSettings):
    catalog: Path = DEFAULT_CATALOG
    epsilon: float = 0.0
    seed: int = 0x5EED

    # quadrature stop rule: est_error <= max(atol, rtol * |value|)
    rtol: float = 1e-3
    atol: float = 0.0
    budget: int = 2**22
    escalated_budget: int = 2**26
    escalated_atol: float = 3e-6
    workers: int = 1

    grid_step: float = 1e-4
    u_max: float = 64.0

    v_floor: bool = True
    log_config: Path = DEFAULT_LOG_CONFIG

    class Config:
        env_file = ".env"
        env_prefix = "SIEVELAB_"


@lru_cache
def get_settings() -> Settings:
    return Settings()  # cached for the process
