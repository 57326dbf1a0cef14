"""
Model configuration.

Values come from, in increasing precedence: the defaults below, a YAML
config file, ``MOBSIM_*`` environment variables (``from_env``) and command
line flags.
"""

import hashlib
import os
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime
from typing import Any, Dict, Optional

import yaml
from dateutil import parser as date_parser

from src.models.data_models import ModelVariant
from src.models.exceptions import ConfigError, FileUnreadable

ENV_PREFIX = "MOBSIM_"


def _parse_time(value: Any) -> datetime:
    if isinstance(value, datetime):
        return value
    try:
        return date_parser.isoparse(str(value))
    except (ValueError, OverflowError) as e:
        raise ConfigError(f"Invalid timestamp '{value}'") from e


def _parse_flag(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"Invalid flag value '{value}'")


@dataclass
class ModelConfig:
    """Parameters of one simulation."""

    rho: float = 0.6
    gamma: float = 0.21
    alpha: float = 0.2
    wt_beta: float = 0.8
    wt_tau_hours: float = 17.0
    min_wt_hours: float = 1.0
    variant: ModelVariant = ModelVariant.STS_EPR
    rsl: bool = True
    reachable_speed_kmh: Optional[float] = None
    degree_social_exploration: bool = False
    n_max: int = 5
    seed: int = 0
    n_agents: int = 0
    start: datetime = datetime(2012, 4, 3)
    end: datetime = datetime(2012, 4, 10)
    min_relevance: float = 0.1

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ModelConfig":
        """Build a configuration from loosely typed key-value pairs."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        return cls().updated(**values)

    @classmethod
    def from_yaml(cls, path: str) -> "ModelConfig":
        try:
            with open(path) as handle:
                values = yaml.safe_load(handle) or {}
        except OSError as e:
            raise FileUnreadable(f"Cannot read config file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"Config file {path} is not valid YAML: {e}") from e
        if not isinstance(values, dict):
            raise ConfigError(f"Config file {path} must hold key-value pairs")
        return cls.from_dict(values)

    @classmethod
    def from_env(cls) -> "ModelConfig":
        """Load configuration from ``MOBSIM_<FIELD>`` environment variables."""
        values = {}
        for f in fields(cls):
            raw = os.getenv(ENV_PREFIX + f.name.upper())
            if raw is not None:
                values[f.name] = raw
        return cls.from_dict(values)

    def updated(self, **values: Any) -> "ModelConfig":
        """Copy with the given fields overridden; ``None`` values are ignored."""
        coerced = {}
        for name, value in values.items():
            if value is None:
                continue
            coerced[name] = self._coerce(name, value)
        return replace(self, **coerced)

    @staticmethod
    def _coerce(name: str, value: Any) -> Any:
        try:
            if name == "variant":
                return value if isinstance(value, ModelVariant) else ModelVariant.parse(str(value))
            if name in ("start", "end"):
                return _parse_time(value)
            if name in ("rsl", "degree_social_exploration"):
                return _parse_flag(value)
            if name in ("n_max", "seed", "n_agents"):
                return int(value)
            if name == "reachable_speed_kmh" and str(value).strip().lower() in ("", "none", "off"):
                return None
            return float(value)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Invalid value for {name}: {value!r}") from e

    def validate(self) -> bool:
        """
        Validate configuration.

        Returns:
            True if the configuration is valid

        Raises:
            ConfigError: naming the first offending field
        """
        if not 0 < self.rho <= 1:
            raise ConfigError(f"rho must be in (0, 1], got {self.rho}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 <= self.alpha <= 1:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.wt_beta < 0:
            raise ConfigError(f"wt_beta must be >= 0, got {self.wt_beta}")
        if not self.wt_tau_hours > 0:
            raise ConfigError(f"wt_tau_hours must be > 0, got {self.wt_tau_hours}")
        if not self.min_wt_hours > 0:
            raise ConfigError(f"min_wt_hours must be > 0, got {self.min_wt_hours}")
        if self.n_max < 1:
            raise ConfigError(f"n_max must be >= 1, got {self.n_max}")
        if self.reachable_speed_kmh is not None and not self.reachable_speed_kmh > 0:
            raise ConfigError(f"reachable_speed_kmh must be > 0, got {self.reachable_speed_kmh}")
        if self.n_agents < 0:
            raise ConfigError(f"n_agents must be >= 0, got {self.n_agents}")
        if self.end < self.start:
            raise ConfigError(f"end ({self.end}) precedes start ({self.start})")
        if self.min_relevance <= 0:
            raise ConfigError(f"min_relevance must be > 0, got {self.min_relevance}")
        return True

    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values["variant"] = self.variant.value
        values["start"] = self.start.isoformat()
        values["end"] = self.end.isoformat()
        return values

    def digest(self) -> str:
        """Short fingerprint of the configuration, stable across runs."""
        dump = yaml.safe_dump(self.to_dict(), sort_keys=True)
        return hashlib.sha256(dump.encode("utf-8")).hexdigest()[:16]
