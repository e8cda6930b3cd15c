"""Sensor models: quantized, bounded readings from ground-truth values.

Quantization is the visible behavior of the modeled devices (a temperature
sensor reporting in 0.5 degC steps, a 16-bit light sensor saturating at
65535); residual error lives in sensor_noise_std. Tie-breaking is pinned to
round-half-away-from-zero so independent implementations agree bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .environment import Channel
from .rng import gaussian
from .topology import NodeAddress


@dataclass(frozen=True)
class SensorSpec:
    """Device characteristics for one channel."""

    channel: Channel
    quant_step: float
    min_value: float
    max_value: float
    sensor_noise_std: float = 0.0

    def __post_init__(self) -> None:
        if self.quant_step <= 0:
            raise ValueError("quant_step must be > 0")
        if not self.min_value < self.max_value:
            raise ValueError("min_value must be < max_value")
        if self.sensor_noise_std < 0:
            raise ValueError("sensor_noise_std must be >= 0")


@dataclass(frozen=True)
class Reading:
    """One sensed value per node-channel per poll round.

    value None is the absence marker: the value never reached the base
    station this round. It is never a stale carry-forward.

    sim_time is derived presentation data (round x round interval) and is
    excluded from equality; the frame wire format does not carry it.
    """

    address: NodeAddress
    channel: Channel
    round: int
    sim_time: float = field(compare=False)
    value: float | None = None


def quantize(value: float, step: float) -> float:
    """Round to the nearest multiple of step, ties away from zero."""
    scaled = abs(value) / step
    if scaled >= 2**53:  # no fractional part at this magnitude; rounding is identity
        return value
    return math.copysign(math.floor(scaled + 0.5), value) * step


def sample(spec: SensorSpec, truth: float, rng_key: int) -> float:
    """Sensor output for a ground-truth value: clamp(quantize(truth + noise)).

    Deterministic given rng_key; the noise draw is a standard normal scaled
    by sensor_noise_std.
    """
    noisy = truth
    if spec.sensor_noise_std:
        noisy += spec.sensor_noise_std * gaussian(rng_key)
    q = quantize(noisy, spec.quant_step)
    return min(max(q, spec.min_value), spec.max_value)


_DEFAULT_SPECS = {
    Channel.TEMP_C: SensorSpec(Channel.TEMP_C, quant_step=0.5, min_value=-40.0, max_value=125.0, sensor_noise_std=0.1),
    Channel.LIGHT_RAW: SensorSpec(Channel.LIGHT_RAW, quant_step=1.0, min_value=0.0, max_value=65535.0, sensor_noise_std=0.0),
    # Gas ranges are config defaults drawn from the named devices' datasheets,
    # not authoritative; operators override them per site.
    Channel.CH4_PPM: SensorSpec(Channel.CH4_PPM, quant_step=1.0, min_value=0.0, max_value=50000.0, sensor_noise_std=5.0),
    Channel.CO_PPM: SensorSpec(Channel.CO_PPM, quant_step=1.0, min_value=0.0, max_value=1000.0, sensor_noise_std=1.0),
}


def default_sensor_suite(channels: set[Channel] | frozenset[Channel]) -> dict[Channel, SensorSpec]:
    """Built-in sensor specs for the requested channels."""
    return {c: _DEFAULT_SPECS[c] for c in sorted(channels, key=lambda c: c.value)}
