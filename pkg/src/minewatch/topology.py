"""Tree network structure and node addressing.

Addresses are dot-joined positive integers ("1", "1.2"); the base station
has the empty path and renders as "0". A Topology is validated on
construction and immutable afterwards, so it is safe to share read-only
across threads. Dynamic reconfiguration at runtime is out of scope.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .environment import Channel, UnknownChannelError

DEFAULT_MAX_DEPTH = 2

_COMPONENT_RE = re.compile(r"^[1-9][0-9]*$")


class TopologyError(ValueError):
    """Base for topology construction/parsing problems."""


class TopologySyntaxError(TopologyError):
    """Document or address text is not well-formed."""


class AddressSyntaxError(TopologySyntaxError):
    """An address string does not match the canonical grammar."""


class DuplicateAddressError(TopologyError):
    """Two node entries share one address."""


class MissingParentError(TopologyError):
    """A non-base node's parent address is not declared."""


class RoleMismatchError(TopologyError):
    """A node's role contradicts its address or its children."""


class DepthExceededError(TopologyError):
    """A node is deeper than the topology's max_depth."""


class UnknownAddressError(TopologyError):
    """An address was looked up that the topology does not contain."""


class Role(Enum):
    BASE_STATION = "base"
    CLUSTER_HEAD = "cluster_head"
    END_DEVICE = "end_device"


@dataclass(frozen=True, order=True)
class NodeAddress:
    """Position in the tree as a path of positive integers; () is the base."""

    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for c in self.path:
            if not isinstance(c, int) or isinstance(c, bool) or c < 1:
                raise AddressSyntaxError(f"path components must be integers >= 1, got {c!r}")

    @property
    def is_base(self) -> bool:
        return not self.path

    @property
    def depth(self) -> int:
        return len(self.path)

    def render(self) -> str:
        return ".".join(str(c) for c in self.path) if self.path else "0"

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "NodeAddress":
        if text == "0":
            return cls(())
        parts = text.split(".")
        for p in parts:
            if not _COMPONENT_RE.match(p):
                raise AddressSyntaxError(f"invalid address {text!r}")
        return cls(tuple(int(p) for p in parts))


BASE_ADDRESS = NodeAddress(())


def parent(addr: NodeAddress) -> NodeAddress:
    """The address one hop up the tree. The base station has no parent."""
    if addr.is_base:
        raise TopologyError("base station has no parent")
    return NodeAddress(addr.path[:-1])


def is_descendant(a: NodeAddress, b: NodeAddress) -> bool:
    """True iff b's path is a (proper or equal) prefix of a's path.

    Reflexive by convention, so a cluster query for a head includes the
    head's own readings.
    """
    return a.path[: len(b.path)] == b.path


@dataclass(frozen=True)
class NodeSpec:
    """One node: address, role, planar position in meters, sensed channels."""

    address: NodeAddress
    role: Role
    position: tuple[float, float]
    channels: frozenset[Channel]

    def sorted_channels(self) -> tuple[Channel, ...]:
        return tuple(sorted(self.channels, key=lambda c: c.value))


@dataclass(frozen=True)
class Topology:
    """Validated tree of nodes, keyed by address in canonical (sorted) order."""

    nodes: Mapping[NodeAddress, NodeSpec]
    max_depth: int = DEFAULT_MAX_DEPTH
    _children: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise TopologyError("max_depth must be >= 1")
        ordered = {a: self.nodes[a] for a in sorted(self.nodes)}
        object.__setattr__(self, "nodes", ordered)

        bases = [s for s in ordered.values() if s.role is Role.BASE_STATION]
        if len(bases) != 1:
            raise RoleMismatchError(f"exactly one base station required, found {len(bases)}")
        for addr, spec in ordered.items():
            if spec.address != addr:
                raise TopologyError(f"node keyed {addr} declares address {spec.address}")
            if addr.is_base != (spec.role is Role.BASE_STATION):
                raise RoleMismatchError(f"node {addr} role {spec.role.value} contradicts its address")
            if addr.depth > self.max_depth:
                raise DepthExceededError(f"node {addr} exceeds max_depth {self.max_depth}")

        children: dict[NodeAddress, list[NodeSpec]] = {a: [] for a in ordered}
        for addr, spec in ordered.items():
            if addr.is_base:
                continue
            p = parent(addr)
            if p not in ordered:
                raise MissingParentError(f"node {addr} has no parent {p} in the topology")
            children[p].append(spec)
        for addr, spec in ordered.items():
            if spec.role is Role.END_DEVICE and children[addr]:
                raise RoleMismatchError(f"end device {addr} has children")
            if spec.role is Role.CLUSTER_HEAD and not children[addr]:
                raise RoleMismatchError(f"cluster head {addr} has no children")
        object.__setattr__(self, "_children", {a: tuple(c) for a, c in children.items()})

    @property
    def base(self) -> NodeSpec:
        return self.nodes[BASE_ADDRESS]

    def __contains__(self, addr: NodeAddress) -> bool:
        return addr in self.nodes

    def children(self, addr: NodeAddress) -> tuple[NodeSpec, ...]:
        if addr not in self.nodes:
            raise UnknownAddressError(f"unknown address {addr}")
        return self._children[addr]

    def subtree(self, addr: NodeAddress) -> tuple[NodeAddress, ...]:
        """Addresses of addr and all its descendants, in canonical order."""
        if addr not in self.nodes:
            raise UnknownAddressError(f"unknown address {addr}")
        return tuple(a for a in self.nodes if is_descendant(a, addr))

    def sensing_nodes(self) -> tuple[NodeSpec, ...]:
        return tuple(s for s in self.nodes.values() if s.channels)

    def sensing_pairs(self) -> tuple[tuple[NodeAddress, Channel], ...]:
        """Every (address, channel) the network reports, in canonical order."""
        return tuple(
            (spec.address, ch)
            for spec in self.nodes.values()
            for ch in spec.sorted_channels()
            if spec.channels
        )


def route_to_base(addr: NodeAddress, topo: Topology) -> tuple[NodeAddress, ...]:
    """Hop path [addr, parent(addr), ..., base]; length is depth + 1."""
    if addr not in topo:
        raise UnknownAddressError(f"unknown address {addr}")
    hops = [addr]
    while not hops[-1].is_base:
        hops.append(parent(hops[-1]))
    return tuple(hops)


def _node_from_table(table: dict) -> NodeSpec:
    for key in ("addr", "role", "position"):
        if key not in table:
            raise TopologySyntaxError(f"node entry missing {key!r}")
    addr = NodeAddress.parse(str(table["addr"]))
    try:
        role = Role(table["role"])
    except ValueError:
        raise TopologySyntaxError(f"unknown role {table['role']!r}") from None
    pos = table["position"]
    if not isinstance(pos, list) or len(pos) != 2:
        raise TopologySyntaxError(f"node {addr} position must be [x, y]")
    try:
        position = (float(pos[0]), float(pos[1]))
    except (TypeError, ValueError):
        raise TopologySyntaxError(f"node {addr} position must be numeric") from None
    raw_channels = table.get("channels", [])
    if not isinstance(raw_channels, list):
        raise TopologySyntaxError(f"node {addr} channels must be a list")
    try:
        channels = frozenset(Channel.from_id(str(c)) for c in raw_channels)
    except UnknownChannelError as e:
        raise TopologySyntaxError(str(e)) from None
    return NodeSpec(address=addr, role=role, position=position, channels=channels)


def topology_from_dict(data: dict) -> Topology:
    """Build a Topology from a parsed config table ({max_depth, [[node]]})."""
    max_depth = data.get("max_depth", DEFAULT_MAX_DEPTH)
    if isinstance(max_depth, bool) or not isinstance(max_depth, int):
        raise TopologySyntaxError(f"max_depth must be an integer, got {max_depth!r}")
    entries = data.get("node", [])
    if not isinstance(entries, list):
        raise TopologySyntaxError("node entries must be an array of tables")
    nodes: dict[NodeAddress, NodeSpec] = {}
    for table in entries:
        spec = _node_from_table(table)
        if spec.address in nodes:
            raise DuplicateAddressError(f"duplicate address {spec.address}")
        nodes[spec.address] = spec
    return Topology(nodes=nodes, max_depth=max_depth)


def parse_topology(text: str) -> Topology:
    """Parse the topology section of a run-config document.

    Accepts a full run-config as well; only max_depth and [[node]] are read.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise TopologySyntaxError(str(e)) from None
    return topology_from_dict(data)


def render_topology(topo: Topology) -> str:
    """Canonical rendering of a topology; parse_topology round-trips it.

    Byte-stable: nodes sorted by address, floats via repr (shortest
    round-trip form), channels sorted alphabetically.
    """
    lines = [f"max_depth = {topo.max_depth}", ""]
    for spec in topo.nodes.values():
        lines.append("[[node]]")
        lines.append(f'addr = "{spec.address}"')
        lines.append(f'role = "{spec.role.value}"')
        lines.append(f"position = [{spec.position[0]!r}, {spec.position[1]!r}]")
        channel_list = ", ".join(f'"{c.value}"' for c in spec.sorted_channels())
        lines.append(f"channels = [{channel_list}]")
        lines.append("")
    return "\n".join(lines)
