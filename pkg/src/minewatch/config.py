"""Run configuration: one TOML file fully determines a run.

Two runs from an equal config are byte-identical in every output. Sections:
[[node]] + max_depth (topology), [scenario.fields.*] and [[scenario.events]],
[sensors.*] overrides, [link], [sim], [[alert]], [gateway], [output].
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .alerting import AlertError, AlertRule, Comparator
from .environment import (
    Channel,
    Environment,
    ScenarioError,
    scenario_from_dict,
)
from .netsim import LinkModel, SimConfig
from .sensing import SensorSpec, default_sensor_suite
from .topology import NodeAddress, Topology, TopologyError, topology_from_dict


class ConfigError(ValueError):
    """A run-config document cannot be loaded."""


@dataclass(frozen=True)
class GatewayEndpoints:
    tcp: str | None = None
    http: str | None = None
    history: int = 10_000


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    snapshot_file: str = "snapshot.txt"

    def snapshot_path(self) -> str:
        if os.path.isabs(self.snapshot_file):
            return self.snapshot_file
        return os.path.join(self.dir, self.snapshot_file)


@dataclass(frozen=True)
class RunConfig:
    topology: Topology
    environment: Environment
    sensors: dict[Channel, SensorSpec]
    link: LinkModel
    sim: SimConfig
    gateway: GatewayEndpoints
    alerts: tuple[AlertRule, ...]
    output: OutputConfig

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"config syntax: {e}") from None
        try:
            return cls._from_dict(data)
        except (TopologyError, ScenarioError, AlertError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path: str | os.PathLike) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        return cls.loads(text)

    @classmethod
    def _from_dict(cls, data: dict) -> "RunConfig":
        topo = topology_from_dict(data)
        fields, events = scenario_from_dict(data.get("scenario", {}))
        env = Environment(fields=fields, events=events)

        sensed = {ch for spec in topo.nodes.values() for ch in spec.channels}
        missing = sorted(ch.value for ch in sensed if ch not in fields)
        if missing:
            raise ConfigError(f"sensed channels missing scenario fields: {', '.join(missing)}")

        sensors = default_sensor_suite(sensed)
        for name, table in data.get("sensors", {}).items():
            channel = Channel.from_id(name)
            base = sensors.get(channel) or default_sensor_suite({channel})[channel]
            allowed = {"quant_step", "min_value", "max_value", "sensor_noise_std"}
            unknown = set(table) - allowed
            if unknown:
                raise ConfigError(f"unknown sensor keys for {name}: {sorted(unknown)}")
            sensors[channel] = dataclasses.replace(base, **{k: float(v) for k, v in table.items()})
        _check_wire_precision(sensors)

        link_table = data.get("link", {})
        link = LinkModel(
            max_range_m=float(link_table.get("max_range_m", 30.0)),
            loss_prob=float(link_table.get("loss_prob", 0.0)),
        )

        sim_table = data.get("sim", {})
        sim = SimConfig(
            rounds=int(sim_table.get("rounds", 600)),
            seed=int(sim_table.get("seed", 0)),
            round_interval=float(sim_table.get("round_interval", 1.0)),
        )

        gw_table = data.get("gateway", {})
        gateway = GatewayEndpoints(
            tcp=gw_table.get("tcp"),
            http=gw_table.get("http"),
            history=int(gw_table.get("history", 10_000)),
        )

        alerts = []
        for table in data.get("alert", []):
            scope_raw = table.get("scope", "ALL")
            scope = None if scope_raw == "ALL" else NodeAddress.parse(str(scope_raw))
            alerts.append(
                AlertRule(
                    id=str(table["id"]),
                    channel=Channel.from_id(str(table["channel"])),
                    comparator=Comparator(str(table.get("comparator", "GE"))),
                    threshold=float(table["threshold"]),
                    scope=scope,
                    consecutive=int(table.get("consecutive", 3)),
                )
            )

        out_table = data.get("output", {})
        output = OutputConfig(
            dir=str(out_table.get("dir", "out")),
            snapshot_file=str(out_table.get("snapshot_file", "snapshot.txt")),
        )

        return cls(
            topology=topo,
            environment=env,
            sensors=sensors,
            link=link,
            sim=sim,
            gateway=gateway,
            alerts=tuple(alerts),
            output=output,
        )


def _check_wire_precision(sensors: dict[Channel, SensorSpec]) -> None:
    """Values must land on the channel's wire precision or they could not
    round-trip the frame/snapshot grammars."""
    for channel, spec in sensors.items():
        precision = 10.0 ** -channel.wire_decimals
        ratio = spec.quant_step / precision
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(
                f"{channel.value} quant_step {spec.quant_step} is not a multiple "
                f"of the channel's wire precision {precision}"
            )
