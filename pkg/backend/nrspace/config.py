import logging
import os
from typing import Any, Dict, Optional

from dotenv import find_dotenv, load_dotenv

logger = logging.getLogger(__name__)

_ENV_LOADED = False
_ENV_PATH: Optional[str] = None


def _ensure_env_loaded() -> None:
    global _ENV_LOADED, _ENV_PATH
    if _ENV_LOADED:
        return
    # Try nearest .env by walking up from CWD
    found = find_dotenv(usecwd=True)
    if found:
        load_dotenv(found, override=False)
        _ENV_PATH = found
        _ENV_LOADED = True
        return
    # Fallback: repo root relative to this file: backend/nrspace/ -> repo/.env
    repo_root = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
    candidate = os.path.join(repo_root, ".env")
    if os.path.exists(candidate):
        load_dotenv(candidate, override=False)
        _ENV_PATH = candidate
    else:
        _ENV_PATH = None
    _ENV_LOADED = True


def _read_key(*names: str) -> str:
    for name in names:
        value = os.getenv(name)
        if value:
            trimmed = value.strip().strip('"').strip("'")
            if trimmed:
                return trimmed
    return ""


def _read_int(default: int, *names: str) -> int:
    _ensure_env_loaded()
    raw = _read_key(*names)
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"[config] {names[0]}={raw!r} is not an integer, using {default}")
        return default


def _read_float(default: float, *names: str) -> float:
    _ensure_env_loaded()
    raw = _read_key(*names)
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"[config] {names[0]}={raw!r} is not a number, using {default}")
        return default


def get_taylor_order(default: int = 40) -> int:
    """Truncation order N of the Jacobi-tensor Taylor series."""
    return _read_int(default, "NRSPACE_TAYLOR_ORDER", "NRSPACE_ORDER")


def get_rk_step(default: float = 1e-3) -> float:
    """Fixed step of the RK4 oracle."""
    return _read_float(default, "NRSPACE_RK_STEP")


def get_sample_count(default: int = 100_000) -> int:
    return _read_int(default, "NRSPACE_SAMPLES", "NRSPACE_SAMPLE_COUNT")


def get_seed(default: int = 0) -> int:
    return _read_int(default, "NRSPACE_SEED")


def get_simpson_nodes(default: int = 201) -> int:
    return _read_int(default, "NRSPACE_SIMPSON_NODES")


def get_gauss_nodes(default: int = 64) -> int:
    return _read_int(default, "NRSPACE_GAUSS_NODES")


def get_snap_tolerance(default: float = 1e-10) -> float:
    """Distance within which a float is identified with a small radical."""
    return _read_float(default, "NRSPACE_SNAP_TOLERANCE")


def get_truncation_tolerance(default: float = 1e-8) -> float:
    return _read_float(default, "NRSPACE_TRUNCATION_TOL", "NRSPACE_TRUNCATION_TOLERANCE")


def get_workers(default: int = 1) -> int:
    return max(1, _read_int(default, "NRSPACE_WORKERS"))


def get_log_level(default: str = "WARNING") -> str:
    _ensure_env_loaded()
    level = _read_key("NRSPACE_LOG_LEVEL", "LOG_LEVEL").upper()
    return level if isinstance(logging.getLevelName(level), int) else default


def get_env_debug() -> Dict[str, Any]:
    """Return env diagnostics and the resolved numeric settings."""
    _ensure_env_loaded()
    return {
        "env_path": _ENV_PATH,
        "cwd": os.getcwd(),
        "taylor_order": get_taylor_order(),
        "rk_step": get_rk_step(),
        "samples": get_sample_count(),
        "seed": get_seed(),
        "simpson_nodes": get_simpson_nodes(),
        "gauss_nodes": get_gauss_nodes(),
        "snap_tolerance": get_snap_tolerance(),
        "truncation_tolerance": get_truncation_tolerance(),
        "workers": get_workers(),
        "log_level": get_log_level(),
    }
