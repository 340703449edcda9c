#!/usr/bin/env python3
"""
Configuration for the F-VQE toolkit.

Process-wide settings come from the environment (a local .env file is
honoured through python-dotenv). Per-run settings come from a run
configuration file, either JSON or flat key=value lines.
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

RUN_CONFIG_KEYS = {
    'instance', 'ansatz', 'preset', 'seed', 'steps',
    'simulator_cap', 'layers', 'budget', 'record_exact',
    'shots', 'tau', 'learning_rate',
}
_INT_KEYS = {'seed', 'steps', 'simulator_cap', 'layers', 'budget', 'shots'}
_FLOAT_KEYS = {'tau', 'learning_rate'}


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")


@dataclass(frozen=True)
class Settings:
    simulator_cap: int = 29
    brute_force_cap: int = 29
    exact_cap: int = 20
    out_dir: str = 'runs'
    jobs: int = 1
    log_level: str = 'INFO'
    log_file: str = 'fvqe.log'

    @classmethod
    def from_env(cls) -> 'Settings':
        return cls(
            simulator_cap=_env_int('FVQE_SIMULATOR_CAP', 29),
            brute_force_cap=_env_int('FVQE_BRUTE_FORCE_CAP', 29),
            exact_cap=_env_int('FVQE_EXACT_CAP', 20),
            out_dir=os.getenv('FVQE_OUT_DIR', 'runs'),
            jobs=_env_int('FVQE_JOBS', 1),
            log_level=os.getenv('FVQE_LOG_LEVEL', 'INFO').upper(),
            log_file=os.getenv('FVQE_LOG_FILE', 'fvqe.log'),
        )


def get_settings() -> Settings:
    """Settings read fresh from the environment on every call."""
    return Settings.from_env()


def configure_logging(settings: Optional[Settings] = None) -> None:
    """Install the file + console handlers. Only entry points call this."""
    settings = settings or get_settings()
    handlers = [logging.StreamHandler()]
    if settings.log_file:
        handlers.insert(0, logging.FileHandler(settings.log_file))
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def _coerce(key: str, value: Any) -> Any:
    if key in _INT_KEYS:
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ValueError(f"Run config key '{key}' must be an integer, got {value!r}")
    if key in _FLOAT_KEYS:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ValueError(f"Run config key '{key}' must be a number, got {value!r}")
    if key == 'record_exact':
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ('1', 'true', 'yes', 'on'):
            return True
        if text in ('0', 'false', 'no', 'off'):
            return False
        raise ValueError(f"Run config key 'record_exact' must be a boolean, got {value!r}")
    return str(value).strip()


def parse_run_config(text: str) -> Dict[str, Any]:
    """Parse a JSON object or key=value lines (# comments allowed)."""
    stripped = text.strip()
    if stripped.startswith('{'):
        raw = json.loads(stripped)
        if not isinstance(raw, dict):
            raise ValueError("Run config JSON must be an object")
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ValueError(f"Run config line {lineno} is not key=value: {line!r}")
            key, value = line.split('=', 1)
            raw[key.strip()] = value.strip()

    unknown = sorted(set(raw) - RUN_CONFIG_KEYS)
    if unknown:
        raise ValueError(f"Unknown run config keys: {', '.join(unknown)}")
    return {key: _coerce(key, value) for key, value in raw.items()}


def load_run_config(path: str) -> Dict[str, Any]:
    config = parse_run_config(Path(path).read_text())
    logger.info(f"Loaded run config {path}: {config}")
    return config
