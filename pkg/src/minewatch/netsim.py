"""Round-based radio simulation of the interrupt-call polling protocol.

Each round the base station polls its children; cluster heads poll their
own children and forward an aggregate up the tree. A dropped poll or reply
immediately yields NULL readings for the affected subtree this round; there
are no retries (an implicit one-exchange timeout). Loss is data, not error.

Loss draws are keyed by (round, src, dst, kind) from the run seed, so the
whole simulation is a pure function of its inputs and replays byte-for-byte.
The engine is single-threaded; RoundResults are immutable values that can be
handed across thread boundaries to the gateway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

from .environment import Channel, Environment
from .rng import DOMAIN_LINK, DOMAIN_SENSOR, derive_key, uniform
from .sensing import Reading, SensorSpec, sample
from .topology import NodeAddress, NodeSpec, Role, Topology, is_descendant, parent

DEFAULT_MAX_RANGE_M = 30.0


class FrameError(ValueError):
    """Base for frame construction/decoding problems."""


class MalformedFrameError(FrameError):
    """Line does not match the frame grammar or violates frame invariants."""


class UnknownFrameKindError(FrameError):
    """Frame kind token outside {INTCALL, DATAREPLY, AGGREGATE}."""


class FrameAddressError(FrameError):
    """An address token is not a valid node address."""


class FrameValueError(FrameError):
    """A payload token carries an unknown channel or non-numeric value."""


class FrameKind(Enum):
    INTCALL = "INTCALL"
    DATAREPLY = "DATAREPLY"
    AGGREGATE = "AGGREGATE"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]


_KIND_CODES = {FrameKind.INTCALL: 0, FrameKind.DATAREPLY: 1, FrameKind.AGGREGATE: 2}


@dataclass(frozen=True)
class LinkModel:
    """Shared radio model: every node has the same range and loss behavior."""

    max_range_m: float = DEFAULT_MAX_RANGE_M
    loss_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.max_range_m <= 0:
            raise ValueError("max_range_m must be > 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")


@dataclass(frozen=True)
class Frame:
    """Protocol message. INTCALL polls downward; DATAREPLY and AGGREGATE
    carry readings one hop toward the base."""

    kind: FrameKind
    src: NodeAddress
    dst: NodeAddress
    round: int
    payload: tuple[Reading, ...] = ()

    def __post_init__(self) -> None:
        if self.round < 0:
            raise MalformedFrameError("round must be >= 0")
        if self.kind is FrameKind.INTCALL:
            if self.payload:
                raise MalformedFrameError("INTCALL carries no payload")
            if self.dst.is_base or parent(self.dst) != self.src:
                raise MalformedFrameError(f"INTCALL src {self.src} is not parent of dst {self.dst}")
            return
        if self.src.is_base or parent(self.src) != self.dst:
            raise MalformedFrameError(f"{self.kind.value} dst {self.dst} is not parent of src {self.src}")
        for r in self.payload:
            if r.round != self.round:
                raise MalformedFrameError(f"payload reading round {r.round} != frame round {self.round}")
            if self.kind is FrameKind.DATAREPLY and r.address != self.src:
                raise MalformedFrameError(f"DATAREPLY payload for {r.address} is not from src {self.src}")
            if self.kind is FrameKind.AGGREGATE and not is_descendant(r.address, self.src):
                raise MalformedFrameError(f"AGGREGATE payload for {r.address} outside subtree of {self.src}")


@dataclass(frozen=True)
class DeliveryRecord:
    """One frame transmission attempt and its fate."""

    round: int
    kind: FrameKind
    src: NodeAddress
    dst: NodeAddress
    delivered: bool

    def render(self) -> str:
        fate = "delivered" if self.delivered else "dropped"
        return f"{self.round} {self.kind.value} {self.src} {self.dst} {fate}"


@dataclass(frozen=True)
class RoundResult:
    """The base station's view of one poll round.

    readings has exactly one entry per (sensing node, declared channel);
    absence is expressed as None, never as a missing key.
    """

    round: int
    sim_time: float
    readings: dict[tuple[NodeAddress, Channel], float | None]
    delivery_log: tuple[DeliveryRecord, ...] = ()


@dataclass(frozen=True)
class SimConfig:
    rounds: int
    seed: int = 0
    round_interval: float = 1.0

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.round_interval <= 0:
            raise ValueError("round_interval must be > 0")

    def sim_time(self, round_index: int) -> float:
        return round_index * self.round_interval


def link_key(seed: int, round_index: int, src: NodeAddress, dst: NodeAddress, kind: FrameKind) -> int:
    """RNG key for one frame transmission's loss draw."""
    return derive_key(
        seed,
        DOMAIN_LINK,
        round_index,
        len(src.path),
        *src.path,
        len(dst.path),
        *dst.path,
        kind.code,
    )


def sensor_key(seed: int, round_index: int, addr: NodeAddress, channel: Channel) -> int:
    """RNG key for one node-channel sensor noise draw."""
    return derive_key(seed, DOMAIN_SENSOR, round_index, len(addr.path), *addr.path, channel.code)


def deliver(
    link: LinkModel,
    src_pos: tuple[float, float],
    dst_pos: tuple[float, float],
    rng_key: int,
) -> bool:
    """Whether one frame transmission succeeds.

    Never delivers beyond max_range_m; in range, succeeds with probability
    1 - loss_prob under the keyed generator.
    """
    if math.hypot(src_pos[0] - dst_pos[0], src_pos[1] - dst_pos[1]) > link.max_range_m:
        return False
    return uniform(rng_key) >= link.loss_prob


def sample_node_readings(
    node: NodeSpec,
    env: Environment,
    sensors: dict[Channel, SensorSpec],
    round_index: int,
    sim_time: float,
    seed: int,
) -> tuple[Reading, ...]:
    """Sample every channel a node senses, in canonical channel order."""
    out = []
    for channel in node.sorted_channels():
        truth = env.value(channel, node.position, sim_time, seed)
        value = sample(sensors[channel], truth, sensor_key(seed, round_index, node.address, channel))
        out.append(Reading(node.address, channel, round_index, sim_time, value))
    return tuple(out)


def _null_subtree(topo: Topology, root: NodeAddress, round_index: int, sim_time: float) -> list[Reading]:
    out = []
    for addr in topo.subtree(root):
        spec = topo.nodes[addr]
        for channel in spec.sorted_channels():
            out.append(Reading(addr, channel, round_index, sim_time, None))
    return out


def _transmit(
    frame: Frame,
    topo: Topology,
    link: LinkModel,
    seed: int,
    log: list[DeliveryRecord],
) -> bool:
    ok = deliver(
        link,
        topo.nodes[frame.src].position,
        topo.nodes[frame.dst].position,
        link_key(seed, frame.round, frame.src, frame.dst, frame.kind),
    )
    log.append(DeliveryRecord(frame.round, frame.kind, frame.src, frame.dst, ok))
    return ok


def _poll_children(
    node: NodeSpec,
    topo: Topology,
    env: Environment,
    sensors: dict[Channel, SensorSpec],
    link: LinkModel,
    round_index: int,
    seed: int,
    sim_time: float,
    log: list[DeliveryRecord],
) -> list[Reading]:
    """Poll each child of node in address order; collect its subtree readings."""
    collected: list[Reading] = []
    for child in topo.children(node.address):
        intcall = Frame(FrameKind.INTCALL, node.address, child.address, round_index)
        if not _transmit(intcall, topo, link, seed, log):
            collected.extend(_null_subtree(topo, child.address, round_index, sim_time))
            continue
        if child.role is Role.END_DEVICE:
            payload = sample_node_readings(child, env, sensors, round_index, sim_time, seed)
            reply = Frame(FrameKind.DATAREPLY, child.address, node.address, round_index, payload)
            if _transmit(reply, topo, link, seed, log):
                collected.extend(payload)
            else:
                collected.extend(_null_subtree(topo, child.address, round_index, sim_time))
        else:
            aggregate = poll_cluster(
                child, topo, env, sensors, link, round_index, seed, sim_time=sim_time, log=log
            )
            if _transmit(aggregate, topo, link, seed, log):
                collected.extend(aggregate.payload)
            else:
                collected.extend(_null_subtree(topo, child.address, round_index, sim_time))
    return collected


def poll_cluster(
    head: NodeSpec,
    topo: Topology,
    env: Environment,
    sensors: dict[Channel, SensorSpec],
    link: LinkModel,
    round_index: int,
    seed: int,
    *,
    sim_time: float | None = None,
    log: list[DeliveryRecord] | None = None,
) -> Frame:
    """One cluster head's poll cycle: poll every child, append own readings,
    return the AGGREGATE frame addressed to the head's parent.

    Dropped polls/replies surface as None values in the aggregate. The
    caller rolls the aggregate frame's own delivery.
    """
    if head.role is not Role.CLUSTER_HEAD:
        raise ValueError(f"{head.address} is not a cluster head")
    if sim_time is None:
        sim_time = float(round_index)
    if log is None:
        log = []
    payload = _poll_children(head, topo, env, sensors, link, round_index, seed, sim_time, log)
    payload.extend(sample_node_readings(head, env, sensors, round_index, sim_time, seed))
    return Frame(FrameKind.AGGREGATE, head.address, parent(head.address), round_index, tuple(payload))


def run_round(
    topo: Topology,
    env: Environment,
    sensors: dict[Channel, SensorSpec],
    link: LinkModel,
    config: SimConfig,
    round_index: int,
) -> RoundResult:
    """Execute one base-initiated poll round over the whole tree."""
    sim_time = config.sim_time(round_index)
    log: list[DeliveryRecord] = []
    base = topo.base
    collected = _poll_children(base, topo, env, sensors, link, round_index, config.seed, sim_time, log)
    if base.channels:
        collected.extend(sample_node_readings(base, env, sensors, round_index, sim_time, config.seed))
    readings = {(r.address, r.channel): r.value for r in collected}
    return RoundResult(round_index, sim_time, readings, tuple(log))


def run_sim(
    topo: Topology,
    env: Environment,
    sensors: dict[Channel, SensorSpec],
    link: LinkModel,
    config: SimConfig,
) -> Iterator[RoundResult]:
    """Stream of exactly config.rounds results, deterministic in config.seed."""
    for round_index in range(config.rounds):
        yield run_round(topo, env, sensors, link, config, round_index)


def encode_frame(frame: Frame) -> bytes:
    """Render a frame on the line grammar:
    ``FRAME <KIND> <src> <dst> <round> [<addr>:<CHANNEL>=<value|NULL> ...]``
    with a trailing newline. Values print at the channel's canonical
    precision (TEMP_C one decimal, integer channels bare).
    """
    parts = ["FRAME", frame.kind.value, str(frame.src), str(frame.dst), str(frame.round)]
    for r in frame.payload:
        rendered = "NULL" if r.value is None else r.channel.format_value(r.value)
        parts.append(f"{r.address}:{r.channel.value}={rendered}")
    return (" ".join(parts) + "\n").encode("ascii")


def _decode_reading(token: str, round_index: int, sim_time: float) -> Reading:
    addr_part, sep, rest = token.partition(":")
    if not sep:
        raise MalformedFrameError(f"payload token {token!r} missing ':'")
    channel_part, sep, value_part = rest.partition("=")
    if not sep:
        raise MalformedFrameError(f"payload token {token!r} missing '='")
    try:
        addr = NodeAddress.parse(addr_part)
    except ValueError:
        raise FrameAddressError(f"bad address {addr_part!r}") from None
    try:
        channel = Channel(channel_part)
    except ValueError:
        raise FrameValueError(f"unknown channel {channel_part!r}") from None
    if value_part == "NULL":
        value = None
    else:
        try:
            value = channel.parse_value(value_part)
        except ValueError:
            raise FrameValueError(f"non-numeric value {value_part!r}") from None
    return Reading(addr, channel, round_index, sim_time, value)


def decode_frame(data: bytes | str, round_interval: float = 1.0) -> Frame:
    """Parse one frame line. Inverse of encode_frame for valid frames.

    The wire does not carry sim_time; readings are reconstructed with
    round x round_interval (which Reading equality ignores).
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError:
            raise MalformedFrameError("frame is not ASCII") from None
    else:
        text = data
    if text.endswith("\n"):
        text = text[:-1]
    if "\n" in text:
        raise MalformedFrameError("frame must be a single line")
    tokens = text.split(" ")
    if len(tokens) < 5 or tokens[0] != "FRAME" or "" in tokens:
        raise MalformedFrameError(f"not a frame line: {text!r}")
    try:
        kind = FrameKind(tokens[1])
    except ValueError:
        raise UnknownFrameKindError(f"unknown frame kind {tokens[1]!r}") from None
    try:
        src = NodeAddress.parse(tokens[2])
        dst = NodeAddress.parse(tokens[3])
    except ValueError:
        raise FrameAddressError(f"bad address in {text!r}") from None
    try:
        round_index = int(tokens[4])
    except ValueError:
        raise MalformedFrameError(f"bad round {tokens[4]!r}") from None
    if round_index < 0:
        raise MalformedFrameError(f"bad round {tokens[4]!r}")
    sim_time = round_index * round_interval
    payload = tuple(_decode_reading(t, round_index, sim_time) for t in tokens[5:])
    return Frame(kind, src, dst, round_index, payload)
