"""settings.py
Run configuration: config.json defaults, environment overrides and CLI flags.
"""
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional
import json
import os

# Ensure .env variables are loaded before accessing os.getenv
from dotenv import load_dotenv
load_dotenv()

from .errors import ConfigError

# field -> (config.json section, key, environment variable)
_SOURCES = {
    "max_terminal_len": ("search", "max_terminal_len", "CAPGRAM_MAX_LEN"),
    "max_states": ("search", "max_states", "CAPGRAM_MAX_STATES"),
    "max_open": ("search", "max_open", None),
    "semi_streams": ("search", "semi_streams", None),
    "form_slack": ("search", "form_slack", None),
    "reach_limit": ("nets", "reach_limit", None),
    "control_capacity": ("nets", "control_capacity", None),
    "control_caps": ("nets", "control_caps", None),
    "symbol_budget": ("transforms", "symbol_budget", None),
    "rule_budget": ("transforms", "rule_budget", None),
    "seed": ("property_suites", "seed", "CAPGRAM_SEED"),
}


def load_config(config_path: Optional[str] = None) -> dict:
    """Load JSON config from `config.json` by default."""
    p = Path(config_path) if config_path else Path(__file__).with_name("config.json")
    try:
        with p.open("r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot load config {p}: {e}") from e


@dataclass(frozen=True)
class RunConfig:
    max_terminal_len: int = 10
    max_states: int = 2_000_000
    max_open: int = 8
    semi_streams: int = 1
    max_form_len: Optional[int] = None
    form_slack: int = 16
    reach_limit: int = 100_000
    control_capacity: int = 1
    control_caps: Optional[Dict[str, int]] = None
    symbol_budget: int = 10_000
    rule_budget: int = 200_000
    output: Optional[str] = None
    seed: int = 2024

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or f.name in ("output", "control_caps"):
                continue
            if value is None:
                continue
            if not isinstance(value, int) or value < 0 or (value == 0 and f.name != "seed"):
                raise ConfigError(f"{f.name} must be a positive integer, got {value!r}")
        for q, b in (self.control_caps or {}).items():
            if isinstance(b, bool) or not isinstance(b, int) or b < 1:
                raise ConfigError(f"control cap of {q} must be a positive integer, got {b!r}")
        if self.max_form_len is not None and self.max_form_len < self.max_terminal_len:
            raise ConfigError("max_form_len must be at least max_terminal_len")

    @classmethod
    def resolve(
        cls,
        overrides: Optional[Dict[str, Any]] = None,
        config: Optional[dict] = None,
    ) -> "RunConfig":
        """
        Build a RunConfig.

        Priority:
        1) explicit overrides (CLI flags) that are not None
        2) environment variables (CAPGRAM_MAX_STATES, CAPGRAM_MAX_LEN, CAPGRAM_SEED)
        3) config.json
        4) dataclass defaults
        """
        cfg = config if config is not None else load_config()
        values: Dict[str, Any] = {}
        for name, (section, key, env) in _SOURCES.items():
            if key in cfg.get(section, {}):
                values[name] = cfg[section][key]
            env_value = os.getenv(env) if env else None
            if env_value:
                try:
                    values[name] = int(env_value)
                except ValueError as e:
                    raise ConfigError(f"{env} must be an integer, got {env_value!r}") from e
        for name, value in (overrides or {}).items():
            if value is not None:
                values[name] = value
        return cls(**values)

    def with_overrides(self, **changes: Any) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def budget(self):
        """SearchBudget for the derivation engines."""
        from .derivation import SearchBudget

        return SearchBudget(
            max_terminal_len=self.max_terminal_len,
            max_form_len=self.max_form_len,
            max_states=self.max_states,
            form_slack=self.form_slack,
        )
