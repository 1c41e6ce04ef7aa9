"""Run configuration: tolerance defaults, config-file discovery, worker count."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, replace

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_GRID = 50
DEFAULT_SEED = 0
DEFAULT_PANELS = 512

# ──────────────────────────────────────────────────────────────────
# Tolerances
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Tolerances:
    """Two-tier residual tolerances plus the numerical-rank threshold.

    ``alg`` applies to quantities computed from jet-exact inputs by linear
    solves, ``fd`` to anything that went through a finite-difference stencil.
    """

    alg: float = 1e-9
    fd: float = 1e-6
    rank: float = 1e-8
    transverse: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("alg", "fd", "rank", "transverse"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"tolerance {name} must be > 0")


# ──────────────────────────────────────────────────────────────────
# Config file discovery
# ──────────────────────────────────────────────────────────────────

# Cached config: None = not loaded yet, False = no config file found
_config_cache: dict | bool | None = None

_INT_KEYS = ("grid", "seed", "threads", "panels")
_FLOAT_KEYS = ("tol_alg", "tol_fd")


def load_config() -> dict | None:
    """Load config from priority locations. Returns dict or None.

    Priority: $PARACONTACT_CONFIG → .paracontact.json in CWD → ~/.paracontact.json
    Invalid JSON or non-dict values are treated as no config.
    """
    global _config_cache
    if _config_cache is not None:
        return _config_cache if _config_cache is not False else None

    paths: list[str] = []
    env_path = os.environ.get("PARACONTACT_CONFIG")
    if env_path:
        paths.append(env_path)
    else:
        paths.append(os.path.join(os.getcwd(), ".paracontact.json"))
        paths.append(os.path.join(os.path.expanduser("~"), ".paracontact.json"))

    for p in paths:
        try:
            with open(p) as f:
                data = json.load(f)
            if isinstance(data, dict):
                logger.debug("loaded config from %s", p)
                _config_cache = _clean(data, p)
                return _config_cache
        except (OSError, json.JSONDecodeError, TypeError):
            continue

    _config_cache = False
    return None


def _clean(data: dict, path: str) -> dict:
    """Drop wrongly-typed values so they fall back to defaults."""
    out: dict = {}
    for key in _INT_KEYS:
        if key in data:
            val = data[key]
            if isinstance(val, int) and not isinstance(val, bool):
                out[key] = val
            else:
                logger.warning("%s: ignoring non-integer %r for %s", path, val, key)
    for key in _FLOAT_KEYS:
        if key in data:
            val = data[key]
            if isinstance(val, (int, float)) and not isinstance(val, bool):
                out[key] = float(val)
            else:
                logger.warning("%s: ignoring non-numeric %r for %s", path, val, key)
    return out


def thread_count(config: dict | None = None) -> int:
    """Worker pool size: $PARACONTACT_THREADS beats the config file."""
    raw = os.environ.get("PARACONTACT_THREADS")
    if raw:
        try:
            val = int(raw)
        except ValueError:
            raise ConfigError(f"PARACONTACT_THREADS must be an integer, got {raw!r}")
        if val < 1:
            raise ConfigError("PARACONTACT_THREADS must be >= 1")
        return val
    if config and config.get("threads", 0) >= 1:
        return config["threads"]
    return 1


# ──────────────────────────────────────────────────────────────────
# Run configuration
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class RunConfig:
    command: str
    source: str | None = None
    builtin: str | None = None
    grid: int = DEFAULT_GRID
    seed: int = DEFAULT_SEED
    tolerances: Tolerances = Tolerances()
    threads: int = 1
    panels: int = DEFAULT_PANELS
    output: str | None = None
    report_format: str = "text"

    def __post_init__(self) -> None:
        if self.grid < 1:
            raise ConfigError("grid size must be >= 1")
        if self.panels < 4 or self.panels % 2:
            raise ConfigError("panels must be an even integer >= 4")
        if self.report_format not in ("text", "json", "both"):
            raise ConfigError(f"unknown report format {self.report_format!r}")


def build_run_config(command: str, **flags) -> RunConfig:
    """Defaults → config file → environment → flags (None means 'not given')."""
    config = load_config() or {}
    base = RunConfig(
        command=command,
        grid=config.get("grid", DEFAULT_GRID),
        seed=config.get("seed", DEFAULT_SEED),
        tolerances=Tolerances(
            alg=config.get("tol_alg", Tolerances.alg),
            fd=config.get("tol_fd", Tolerances.fd),
        ),
        threads=thread_count(config),
        panels=config.get("panels", DEFAULT_PANELS),
    )
    tol = base.tolerances
    if flags.get("tol_alg") is not None:
        tol = replace(tol, alg=flags.pop("tol_alg"))
    if flags.get("tol_fd") is not None:
        tol = replace(tol, fd=flags.pop("tol_fd"))
    flags.pop("tol_alg", None)
    flags.pop("tol_fd", None)
    given = {k: v for k, v in flags.items() if v is not None}
    return replace(base, tolerances=tol, **given)
