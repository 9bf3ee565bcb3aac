"""Library-wide constants and environment overrides."""

import os
from pathlib import Path

from halphen.errors import ParameterError

DEFAULT_MAX_TERMS = 500
DEFAULT_TAIL_TOLERANCE = 1e-15
DEFAULT_DB_PATH = Path.home() / ".halphen" / "halphen.db"

# Im(tau) floor for series evaluation, |q| <= exp(-0.1 pi).
MIN_IM_TAU = 0.05
BLOWUP_GUARD = 1e12
SIN_ALPHA_BAND = 1e-3
# minimum dt^2 coefficient at a geodesic start point
MIN_LAPSE_SQUARED = 1e-9
MAX_GEODESIC_EVALS = 20_000


def get_max_terms() -> int:
    """Return the series truncation limit, respecting HALPHEN_MAX_TERMS env var."""
    env = os.environ.get("HALPHEN_MAX_TERMS")
    if not env:
        return DEFAULT_MAX_TERMS
    try:
        value = int(env)
    except ValueError:
        raise ParameterError(f"HALPHEN_MAX_TERMS must be an integer, got {env!r}") from None
    if value < 1:
        raise ParameterError(f"HALPHEN_MAX_TERMS must be >= 1, got {value}")
    return value


def get_db_path() -> Path:
    """Return the run-archive path, respecting HALPHEN_DB env var."""
    env = os.environ.get("HALPHEN_DB")
    if env:
        return Path(env)
    return DEFAULT_DB_PATH
