"""Ground-truth environment fields over the mine plane and time.

The four sensed channels form a closed set. Truth values are synthesized
deterministically: baseline + diurnal sine + linear spatial gradient +
seeded noise + scenario events (e.g. a gas leak ramping in with a first-order
rise). Everything is a pure function of (position, time, seed), so the same
scenario replays bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .rng import DOMAIN_ENV, derive_key, gaussian


class ScenarioError(ValueError):
    """Base for scenario-document problems."""


class ScenarioSyntaxError(ScenarioError):
    """Document is not well-formed (position carried in the message)."""


class UnknownChannelError(ScenarioError):
    """A channel id outside the closed set was named."""


class ScenarioValueError(ScenarioError):
    """A numeric parameter is malformed or out of range."""


class Channel(Enum):
    """Closed set of sensed channels.

    TEMP_C is degrees Celsius, LIGHT_RAW is raw 16-bit counts (conversion
    to lux is out of scope), CH4_PPM and CO_PPM are parts per million.
    """

    TEMP_C = "TEMP_C"
    LIGHT_RAW = "LIGHT_RAW"
    CH4_PPM = "CH4_PPM"
    CO_PPM = "CO_PPM"

    @property
    def unit(self) -> str:
        return _UNITS[self]

    @property
    def code(self) -> int:
        """Stable small integer used in RNG key derivation."""
        return _CODES[self]

    @property
    def wire_decimals(self) -> int:
        """Canonical precision on every wire format (frames, snapshots, CSV)."""
        return 1 if self is Channel.TEMP_C else 0

    def format_value(self, value: float) -> str:
        """Render a numeric reading at the channel's canonical precision."""
        if self.wire_decimals == 0:
            return str(int(round(value)))
        return f"{value + 0.0:.{self.wire_decimals}f}"

    def parse_value(self, text: str) -> float:
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {text!r}")
        return v

    @classmethod
    def from_id(cls, name: str) -> "Channel":
        try:
            return cls(name)
        except ValueError:
            raise UnknownChannelError(f"unknown channel {name!r}") from None


_UNITS = {
    Channel.TEMP_C: "degC",
    Channel.LIGHT_RAW: "counts",
    Channel.CH4_PPM: "ppm",
    Channel.CO_PPM: "ppm",
}
_CODES = {
    Channel.TEMP_C: 0,
    Channel.LIGHT_RAW: 1,
    Channel.CH4_PPM: 2,
    Channel.CO_PPM: 3,
}


@dataclass(frozen=True)
class EnvField:
    """Truth field for one channel. Value is a pure function of (pos, t, seed)."""

    channel: Channel
    baseline: float
    diurnal_amplitude: float = 0.0
    diurnal_period: float = 86400.0
    noise_std: float = 0.0
    spatial_gradient: float = 0.0

    def __post_init__(self) -> None:
        if self.diurnal_amplitude < 0:
            raise ScenarioValueError("diurnal_amplitude must be >= 0")
        if self.diurnal_period <= 0:
            raise ScenarioValueError("diurnal_period must be > 0")
        if self.noise_std < 0:
            raise ScenarioValueError("noise_std must be >= 0")


@dataclass(frozen=True)
class ScenarioEvent:
    """Localized disturbance, e.g. a gas leak.

    Contributes nothing before start_time and nothing outside radius; inside,
    the contribution is magnitude * (1 - exp(-(t - start) / rise_time_constant)).
    The radius boundary is inclusive.
    """

    channel: Channel
    start_time: float
    center: tuple[float, float]
    radius: float
    magnitude: float
    rise_time_constant: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ScenarioValueError("radius must be > 0")
        if self.rise_time_constant <= 0:
            raise ScenarioValueError("rise_time_constant must be > 0")

    def contribution(self, pos: tuple[float, float], t: float) -> float:
        if t < self.start_time:
            return 0.0
        dx = pos[0] - self.center[0]
        dy = pos[1] - self.center[1]
        if math.hypot(dx, dy) > self.radius:
            return 0.0
        return self.magnitude * (1.0 - math.exp(-(t - self.start_time) / self.rise_time_constant))


def env_value(
    field: EnvField,
    events: tuple[ScenarioEvent, ...] | list[ScenarioEvent],
    pos: tuple[float, float],
    t: float,
    seed: int,
) -> float:
    """Ground-truth value of a field at (pos, t) under the given seed.

    Referentially transparent: equal arguments always give the equal float.
    Noise is keyed by (channel, position quantized to mm, time quantized
    to ms), so co-located samples see the same physical truth.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    x, y = pos
    v = field.baseline
    if field.diurnal_amplitude:
        v += field.diurnal_amplitude * math.sin(2.0 * math.pi * t / field.diurnal_period)
    if field.spatial_gradient:
        v += field.spatial_gradient * x
    if field.noise_std:
        key = derive_key(
            seed,
            DOMAIN_ENV,
            field.channel.code,
            round(x * 1000),
            round(y * 1000),
            round(t * 1000),
        )
        v += field.noise_std * gaussian(key)
    for event in events:
        if event.channel is field.channel:
            v += event.contribution(pos, t)
    return v


@dataclass(frozen=True)
class Environment:
    """A scenario's fields and events bundled for the simulator."""

    fields: dict[Channel, EnvField]
    events: tuple[ScenarioEvent, ...] = ()

    def value(self, channel: Channel, pos: tuple[float, float], t: float, seed: int) -> float:
        return env_value(self.fields[channel], self.events, pos, t, seed)


def _num(table: dict, key: str, default=None) -> float:
    if key not in table:
        if default is None:
            raise ScenarioValueError(f"missing required key {key!r}")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioValueError(f"{key} must be a number, got {v!r}")
    return float(v)


def _field_from_table(channel: Channel, table: dict) -> EnvField:
    return EnvField(
        channel=channel,
        baseline=_num(table, "baseline"),
        diurnal_amplitude=_num(table, "diurnal_amplitude", 0.0),
        diurnal_period=_num(table, "diurnal_period", 86400.0),
        noise_std=_num(table, "noise_std", 0.0),
        spatial_gradient=_num(table, "spatial_gradient", 0.0),
    )


def _event_from_table(table: dict) -> ScenarioEvent:
    center = table.get("center")
    if not isinstance(center, list) or len(center) != 2:
        raise ScenarioValueError(f"event center must be [x, y], got {center!r}")
    return ScenarioEvent(
        channel=Channel.from_id(str(table.get("channel"))),
        start_time=_num(table, "start_time"),
        center=(float(center[0]), float(center[1])),
        radius=_num(table, "radius"),
        magnitude=_num(table, "magnitude"),
        rise_time_constant=_num(table, "rise_time_constant"),
    )


def scenario_from_dict(data: dict) -> tuple[dict[Channel, EnvField], tuple[ScenarioEvent, ...]]:
    """Build (fields, events) from a parsed scenario table."""
    fields: dict[Channel, EnvField] = {}
    for name, table in data.get("fields", {}).items():
        channel = Channel.from_id(name)
        if not isinstance(table, dict):
            raise ScenarioSyntaxError(f"scenario field {name} must be a table")
        fields[channel] = _field_from_table(channel, table)
    events = tuple(
        sorted(
            (_event_from_table(t) for t in data.get("events", [])),
            key=lambda e: e.start_time,
        )
    )
    return fields, events


def load_scenario(text: str) -> tuple[dict[Channel, EnvField], tuple[ScenarioEvent, ...]]:
    """Parse the scenario section of a run-config document.

    Returns one EnvField per declared channel and events sorted by start_time.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioSyntaxError(str(e)) from None
    return scenario_from_dict(data.get("scenario", data))
