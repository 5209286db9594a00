"""
Environment / settings loaded once from .env or env vars.
Used by the numerical services and the CLI.
"""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Parallelism for amplitude grids (0 = one worker per CPU)
    JACOBI_CHAIN_THREADS: int = 0

    # Hypergeometric series
    NONINT_TOL: float = 1e-9

    # Closed forms: |1 - z| below this returns the t = 0 value (integer spectra)
    Z_ONE_TOL: float = 1e-12

    # Chains
    MIRROR_TOL: float = 1e-12

    # Truncation of the infinite (Charlier / Meixner) chains
    WEIGHT_TAIL_TOL: float = 1e-16
    ORACLE_TAIL_TOL: float = 1e-24
    ORACLE_MARGIN: int = 16

    # Oracle eigensolver
    QL_MAX_ITER: int = 30

    # PST scan
    PST_XTOL: float = 1e-10

    # CLI
    DISCREPANCY_TOL: float = 1e-8
    LOG_LEVEL: str = "INFO"

    model_config = {
        "env_file": ["../.env", ".env"],
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }


settings = Settings()
