"""Deterministic tree-topology wireless sensor network simulator with a
telemetry gateway for mine-environment monitoring.

The simulator polls a tree of sensor nodes round by round (losses surface
as NULL readings), aggregates each round into a snapshot at the base
station, publishes it to a periodic text file, and serves concurrent
clients over a TCP line protocol and an HTTP+JSON API with threshold
alarms.
"""

__version__ = "0.1.0"

from .environment import Channel
from .netsim import LinkModel, SimConfig, run_sim
from .topology import NodeAddress, Role, Topology, parse_topology, render_topology

__all__ = [
    "Channel",
    "LinkModel",
    "NodeAddress",
    "Role",
    "SimConfig",
    "Topology",
    "parse_topology",
    "render_topology",
    "run_sim",
]
