"""
Runtime configuration, read from the .env file (see .env.example).

Every value has a default so the engine runs without a .env file.
CLI flags and scenario/econ files take precedence over these settings.
"""

import os
import logging
from dotenv import load_dotenv

load_dotenv()

ENV_KEYS = [
    "H2LCA_DATA_DIR",
    "H2LCA_OUTPUT_DIR",
    "H2LCA_LOG_LEVEL",
    "H2LCA_SPECIFIC_ENERGY",
    "H2LCA_MAX_RATE",
    "H2LCA_OP_COST",
    "H2LCA_CREDIT_RATE",
    "H2LCA_CREDIT_CI_CAP",
    "H2LCA_CI_TOLERANCE",
    "H2LCA_MAX_PRICE_GAP_HOURS",
    "H2LCA_CI_BIN_WIDTH",
    "H2LCA_PRICE_BIN_WIDTH",
]


def _float(name: str, default: float | None) -> float | None:
    raw = os.getenv(name, "")
    if not raw.strip():
        return default
    try:
        return float(raw)
    except ValueError:
        logging.getLogger(__name__).warning("Ignoring non-numeric %s=%r", name, raw)
        return default


def _load():
    global DATA_DIR, OUTPUT_DIR, LOG_LEVEL
    global SPECIFIC_ENERGY, MAX_RATE, OP_COST, CREDIT_RATE, CREDIT_CI_CAP
    global CI_TOLERANCE, MAX_PRICE_GAP_HOURS, CI_BIN_WIDTH, PRICE_BIN_WIDTH

    DATA_DIR = os.getenv("H2LCA_DATA_DIR", "") or os.path.join(
        os.path.dirname(os.path.dirname(__file__)), "data"
    )
    OUTPUT_DIR = os.getenv("H2LCA_OUTPUT_DIR", "") or "outputs"
    LOG_LEVEL = (os.getenv("H2LCA_LOG_LEVEL", "") or "INFO").upper()

    SPECIFIC_ENERGY = _float("H2LCA_SPECIFIC_ENERGY", 52.5)
    MAX_RATE = _float("H2LCA_MAX_RATE", 20.0)
    OP_COST = _float("H2LCA_OP_COST", 1.96)
    CREDIT_RATE = _float("H2LCA_CREDIT_RATE", 2.00)
    CREDIT_CI_CAP = _float("H2LCA_CREDIT_CI_CAP", 0.6)
    CI_TOLERANCE = _float("H2LCA_CI_TOLERANCE", 2.0)
    MAX_PRICE_GAP_HOURS = _float("H2LCA_MAX_PRICE_GAP_HOURS", None)
    CI_BIN_WIDTH = _float("H2LCA_CI_BIN_WIDTH", 10.0)
    PRICE_BIN_WIDTH = _float("H2LCA_PRICE_BIN_WIDTH", 10.0)


_load()


def reload_config(env_path: str | None = None):
    """Reload settings from a .env file (default: the nearest .env). Called after the settings page saves."""
    load_dotenv(env_path, override=True)
    _load()


def current_values() -> dict[str, str]:
    """Raw values of every known key as currently set in the environment."""
    return {key: os.getenv(key, "") for key in ENV_KEYS}


def write_env(values: dict[str, str], env_path: str | None = None) -> str:
    """
    Write settings to a .env file and reload them.

    Args:
        values: Mapping of H2LCA_* keys to raw string values; blanks are skipped
        env_path: Target file (default: .env at the project root)

    Returns:
        Path of the written file
    """
    if env_path is None:
        env_path = os.path.join(os.path.dirname(os.path.dirname(__file__)), ".env")

    with open(env_path, "w", encoding="utf-8") as f:
        for key in ENV_KEYS:
            value = str(values.get(key, "")).strip()
            if value:
                f.write(f"{key}={value}\n")

    for key in ENV_KEYS:
        if not str(values.get(key, "")).strip():
            os.environ.pop(key, None)

    reload_config(env_path)
    return env_path


def configure_logging(level: str | None = None):
    """Install the root log handler once, at LOG_LEVEL unless overridden."""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
