"""
Pydantic model of an experiment campaign and its INI loader.
"""

import configparser
import logging
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from rtxp_sim.core.config import (
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    ConfigError,
    PedamacsConfig,
    ProtocolSettings,
    RadioParams,
    RtxpConfig,
    XmacConfig,
)
from rtxp_sim.core.topology import DEFAULT_AREA

logger = logging.getLogger(__name__)

ProtocolName = Literal["rtxp", "rtxp-no-retx", "pedamacs", "xmac-gradient"]
ChannelName = Literal["free-space", "log-normal"]

DEFAULT_NODE_COUNTS = [100, 200, 300, 400, 500, 600, 700, 800]
OVERRIDE_SECTIONS = ("rtxp", "xmac", "pedamacs", "radio")


class ExperimentSpec(BaseModel):
    """Everything needed to reproduce a campaign, resolved to concrete values."""

    model_config = ConfigDict(extra="forbid")

    protocol: ProtocolName = "rtxp"
    channel: ChannelName = "free-space"
    node_counts: List[int] = Field(default_factory=lambda: list(DEFAULT_NODE_COUNTS))
    replications: int = 20
    alarm_period_s: float = 5.0
    alarms: int = 200
    seed: int = DEFAULT_SEED
    workers: int = DEFAULT_WORKERS
    area: Tuple[float, float] = DEFAULT_AREA
    rtxp: Dict[str, Any] = Field(default_factory=dict)
    xmac: Dict[str, Any] = Field(default_factory=dict)
    pedamacs: Dict[str, Any] = Field(default_factory=dict)
    radio: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("node_counts")
    @classmethod
    def _check_node_counts(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one node count is required")
        if any(n < 2 for n in value):
            raise ValueError("every deployment needs at least 2 nodes")
        return sorted(set(value))

    @field_validator("replications", "alarms", "workers")
    @classmethod
    def _check_positive_int(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("alarm_period_s")
    @classmethod
    def _check_period(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("alarm period must be positive")
        return value

    @property
    def alarm_period_us(self) -> int:
        return int(round(self.alarm_period_s * 1_000_000))

    def settings(self) -> ProtocolSettings:
        """Resolve the override sections into parameter dataclasses."""
        try:
            return ProtocolSettings(
                radio=RadioParams(**self.radio),
                rtxp=RtxpConfig(**self.rtxp),
                xmac=XmacConfig(**self.xmac),
                pedamacs=PedamacsConfig(**self.pedamacs),
            )
        except TypeError as e:
            raise ConfigError(f"unknown parameter: {e}") from e


def _coerce(value: str) -> Any:
    text = value.strip()
    if text.lower() in ("none", ""):
        return None
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_config_file(path: str) -> Dict[str, Any]:
    """Flatten an INI experiment file into ExperimentSpec fields."""
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except OSError as e:
        raise OSError(f"cannot read config file {path}: {e}") from e
    except configparser.Error as e:
        raise ConfigError(f"malformed config file {path}: {e}") from e

    values: Dict[str, Any] = {}
    if parser.has_section("experiment"):
        for key, raw in parser.items("experiment"):
            if key == "node_counts":
                values[key] = [int(n) for n in raw.replace(",", " ").split()]
            elif key == "area":
                values[key] = tuple(float(n) for n in raw.replace(",", " ").split())
            else:
                values[key] = _coerce(raw)
    for section in OVERRIDE_SECTIONS:
        if parser.has_section(section):
            values[section] = {key: _coerce(raw) for key, raw in parser.items(section)}
    unknown = set(parser.sections()) - {"experiment", *OVERRIDE_SECTIONS}
    if unknown:
        raise ConfigError(f"unknown section(s) in {path}: {sorted(unknown)}")
    return values


def load_spec(config_path: Optional[str] = None, **overrides: Any) -> ExperimentSpec:
    """
    Build an ExperimentSpec.

    Precedence: explicit overrides (None means unset), then the config file,
    then the defaults.
    """
    values = read_config_file(config_path) if config_path else {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key in OVERRIDE_SECTIONS:
            values[key] = {**values.get(key, {}), **value}
        else:
            values[key] = value
    try:
        spec = ExperimentSpec(**values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    spec.settings()
    return spec
