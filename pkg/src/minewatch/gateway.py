"""Base-station-to-IP bridge: snapshots, history, publication, requests.

One writer (the simulation feed) publishes; arbitrarily many readers and
subscribers consume. The current snapshot is an immutable value swapped
atomically, the snapshot file is replaced via write-temp-then-rename so a
reader never observes a partial file, and each subscriber has a bounded
queue (overflow closes that connection with ERR 503 rather than silently
dropping publications).
"""

from __future__ import annotations

import json
import logging
import os
import queue
import tempfile
import threading
import time
from collections import deque
from dataclasses import dataclass

from .alerting import AlarmEvent, AlertEngine
from .environment import Channel
from .netsim import RoundResult
from .topology import NodeAddress, Topology, is_descendant

log = logging.getLogger(__name__)

DEFAULT_HISTORY = 10_000
DEFAULT_SUBSCRIBER_QUEUE = 64


class GatewayError(Exception):
    """Base for gateway-side failures."""


class CoverageError(GatewayError):
    """A round did not cover the topology's sensing pairs (simulator bug)."""


class PublishOrderError(GatewayError):
    """publish() was called with a non-increasing seq."""


@dataclass(frozen=True)
class SnapshotEntry:
    address: NodeAddress
    channel: Channel
    value: float | None


@dataclass(frozen=True)
class Snapshot:
    """The base station's aggregated view at one publication instant."""

    seq: int
    sim_time: float
    entries: tuple[SnapshotEntry, ...]

    @property
    def sim_time_ms(self) -> int:
        return round(self.sim_time * 1000)


def build_snapshot(result: RoundResult, topo: Topology) -> Snapshot:
    """Canonical snapshot of one round: entries sorted by address, channel."""
    pairs = topo.sensing_pairs()
    if set(result.readings) != set(pairs):
        raise CoverageError(
            f"round {result.round} covers {len(result.readings)} pairs, topology has {len(pairs)}"
        )
    entries = tuple(SnapshotEntry(addr, ch, result.readings[(addr, ch)]) for addr, ch in pairs)
    return Snapshot(seq=result.round, sim_time=result.sim_time, entries=entries)


def render_snapshot(snapshot: Snapshot) -> bytes:
    """Bit-exact rendering:

    SNAPSHOT <seq> <sim_time_ms>
    NODE <addr> <CHANNEL>=<value|NULL> ...   (one line per node, channels alphabetical)
    END
    """
    lines = [f"SNAPSHOT {snapshot.seq} {snapshot.sim_time_ms}"]
    current_addr = None
    parts: list[str] = []
    for entry in snapshot.entries:
        if entry.address != current_addr:
            if parts:
                lines.append(" ".join(parts))
            current_addr = entry.address
            parts = [f"NODE {entry.address}"]
        rendered = "NULL" if entry.value is None else entry.channel.format_value(entry.value)
        parts.append(f"{entry.channel.value}={rendered}")
    if parts:
        lines.append(" ".join(parts))
    lines.append("END")
    return ("\n".join(lines) + "\n").encode("ascii")


def filter_snapshot(snapshot: Snapshot, cluster: NodeAddress) -> Snapshot:
    """Restrict a snapshot to the subtree rooted at cluster (same seq/time)."""
    entries = tuple(e for e in snapshot.entries if is_descendant(e.address, cluster))
    return Snapshot(snapshot.seq, snapshot.sim_time, entries)


def snapshot_to_json(snapshot: Snapshot) -> dict:
    return {
        "seq": snapshot.seq,
        "sim_time_ms": snapshot.sim_time_ms,
        "entries": [
            {"addr": str(e.address), "channel": e.channel.value, "value": e.value}
            for e in snapshot.entries
        ],
    }


def alarm_to_json(event: AlarmEvent) -> dict:
    return {
        "kind": event.kind.value,
        "rule": event.rule_id,
        "addr": str(event.address),
        "value": event.value,
        "seq": event.seq,
    }


@dataclass(frozen=True)
class SeriesPoint:
    seq: int
    sim_time_ms: int
    value: float | None


class SeriesStore:
    """Per (address, channel) ring buffers of recent history."""

    def __init__(self, pairs, capacity: int = DEFAULT_HISTORY) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._buffers: dict[tuple[NodeAddress, Channel], deque[SeriesPoint]] = {
            pair: deque(maxlen=capacity) for pair in pairs
        }
        self._last_seq: int | None = None

    def append_snapshot(self, snapshot: Snapshot) -> None:
        if self._last_seq is not None and snapshot.seq <= self._last_seq:
            raise PublishOrderError(f"seq {snapshot.seq} not after {self._last_seq}")
        for entry in snapshot.entries:
            buf = self._buffers.get((entry.address, entry.channel))
            if buf is not None:
                buf.append(SeriesPoint(snapshot.seq, snapshot.sim_time_ms, entry.value))
        self._last_seq = snapshot.seq

    def known(self, addr: NodeAddress, channel: Channel) -> bool:
        return (addr, channel) in self._buffers

    def series(self, addr: NodeAddress, channel: Channel, from_seq: int, to_seq: int) -> list[SeriesPoint]:
        """Points with from_seq <= seq <= to_seq, oldest first."""
        buf = self._buffers[(addr, channel)]
        return [p for p in buf if from_seq <= p.seq <= to_seq]


def render_series_csv(points, channel: Channel) -> bytes:
    """CSV export: header seq,sim_time_ms,value; NULL as empty field."""
    lines = ["seq,sim_time_ms,value"]
    for p in points:
        rendered = "" if p.value is None else channel.format_value(p.value)
        lines.append(f"{p.seq},{p.sim_time_ms},{rendered}")
    return ("\n".join(lines) + "\n").encode("ascii")


@dataclass(frozen=True)
class Publication:
    """One publication as seen by a subscriber: the snapshot (already
    cluster-filtered for this subscriber) plus matching alarm events."""

    snapshot: Snapshot
    events: tuple[AlarmEvent, ...]


class Subscription:
    """Bounded feed of publications for one connected subscriber."""

    def __init__(self, cluster: NodeAddress | None, maxsize: int) -> None:
        self.cluster = cluster
        self.queue: queue.Queue[Publication] = queue.Queue(maxsize=maxsize)
        self.overflowed = False


@dataclass(frozen=True)
class BytesResponse:
    data: bytes


@dataclass(frozen=True)
class StreamResponse:
    subscription: "Subscription"


def _err(code: int, message: str) -> BytesResponse:
    return BytesResponse(f"ERR {code} {message}\n".encode("ascii"))


class Gateway:
    """Aggregation point between the simulation feed and remote clients."""

    def __init__(
        self,
        topo: Topology,
        *,
        snapshot_path: str | os.PathLike | None = None,
        history: int = DEFAULT_HISTORY,
        subscriber_queue: int = DEFAULT_SUBSCRIBER_QUEUE,
        alerts: AlertEngine | None = None,
    ) -> None:
        self.topo = topo
        self.snapshot_path = os.fspath(snapshot_path) if snapshot_path is not None else None
        self.alerts = alerts if alerts is not None else AlertEngine()
        self.store = SeriesStore(topo.sensing_pairs(), capacity=history)
        self._subscriber_queue = subscriber_queue
        self._lock = threading.Lock()
        self._current: Snapshot | None = None
        self._subscribers: list[Subscription] = []
        self.closing = threading.Event()

    # -- publication path (single writer) ------------------------------

    def current(self) -> Snapshot | None:
        return self._current

    def publish(self, snapshot: Snapshot) -> list[AlarmEvent]:
        """Publish one snapshot: file, history, current view, subscribers.

        The file write happens first; on failure the previous snapshot
        remains current and no state has changed.
        """
        with self._lock:
            if self._current is not None and snapshot.seq <= self._current.seq:
                raise PublishOrderError(f"seq {snapshot.seq} not after {self._current.seq}")
            rendered = render_snapshot(snapshot)
            if self.snapshot_path is not None:
                self._write_atomic(rendered)
            self.store.append_snapshot(snapshot)
            self._current = snapshot
            events = self.alerts.evaluate(snapshot)
            for sub in self._subscribers:
                if sub.overflowed:
                    continue
                view = snapshot if sub.cluster is None else filter_snapshot(snapshot, sub.cluster)
                matching = tuple(
                    ev for ev in events if sub.cluster is None or is_descendant(ev.address, sub.cluster)
                )
                try:
                    sub.queue.put_nowait(Publication(view, matching))
                except queue.Full:
                    sub.overflowed = True
                    log.warning("subscriber overflowed at seq %d; closing", snapshot.seq)
            return events

    def _write_atomic(self, data: bytes) -> None:
        directory = os.path.dirname(self.snapshot_path) or "."
        fd, tmp_path = tempfile.mkstemp(prefix=".snapshot-", dir=directory)
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp_path, self.snapshot_path)
        except BaseException:
            try:
                os.unlink(tmp_path)
            except OSError:
                pass
            raise

    def alerts_call(self, fn):
        """Run a rule-management call serialized with the publication path."""
        with self._lock:
            return fn(self.alerts)

    def series(self, addr: NodeAddress, channel: Channel, from_seq: int, to_seq: int) -> list[SeriesPoint]:
        """Locked history read; concurrent with publication, never torn."""
        with self._lock:
            return self.store.series(addr, channel, from_seq, to_seq)

    # -- subscribers ----------------------------------------------------

    def subscribe(self, cluster: NodeAddress | None = None) -> Subscription:
        sub = Subscription(cluster, self._subscriber_queue)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def drain(self, timeout: float = 5.0) -> None:
        """Wait until every live subscriber queue is empty (or timeout)."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                pending = any(not s.queue.empty() for s in self._subscribers if not s.overflowed)
            if not pending:
                return
            time.sleep(0.01)

    def close(self) -> None:
        self.closing.set()

    # -- request handling -------------------------------------------------

    def handle_request(self, line: str) -> BytesResponse | StreamResponse:
        """Serve one line-protocol request. Malformed requests become ERR
        responses, never exceptions."""
        tokens = line.strip().split()
        if not tokens:
            return _err(400, "empty request")
        if tokens[0] == "GET" and len(tokens) >= 2:
            if tokens[1] == "SNAPSHOT" and len(tokens) == 2:
                return self._get_snapshot(None)
            if tokens[1] == "CLUSTER" and len(tokens) == 3:
                return self._get_cluster(tokens[2])
            if tokens[1] == "SERIES" and len(tokens) == 6:
                return self._get_series(tokens[2], tokens[3], tokens[4], tokens[5])
            return _err(400, "malformed request")
        if tokens[0] == "SUBSCRIBE" and len(tokens) <= 2:
            cluster = None
            if len(tokens) == 2:
                try:
                    cluster = NodeAddress.parse(tokens[1])
                except ValueError:
                    return _err(400, f"bad address {tokens[1]}")
                if cluster not in self.topo:
                    return _err(404, f"unknown address {tokens[1]}")
            return StreamResponse(self.subscribe(cluster))
        return _err(400, "malformed request")

    def _get_snapshot(self, cluster: NodeAddress | None) -> BytesResponse:
        snapshot = self._current
        if snapshot is None:
            return _err(409, "no snapshot published yet")
        if cluster is not None:
            snapshot = filter_snapshot(snapshot, cluster)
        return BytesResponse(render_snapshot(snapshot))

    def _get_cluster(self, addr_text: str) -> BytesResponse:
        try:
            cluster = NodeAddress.parse(addr_text)
        except ValueError:
            return _err(400, f"bad address {addr_text}")
        if cluster not in self.topo:
            return _err(404, f"unknown address {addr_text}")
        return self._get_snapshot(cluster)

    def _get_series(self, addr_text: str, channel_text: str, from_text: str, to_text: str) -> BytesResponse:
        try:
            addr = NodeAddress.parse(addr_text)
        except ValueError:
            return _err(400, f"bad address {addr_text}")
        try:
            channel = Channel(channel_text)
        except ValueError:
            return _err(404, f"unknown channel {channel_text}")
        try:
            from_seq, to_seq = int(from_text), int(to_text)
        except ValueError:
            return _err(400, "series window must be integers")
        if not self.store.known(addr, channel):
            return _err(404, f"no series for {addr_text} {channel_text}")
        points = self.series(addr, channel, from_seq, to_seq)
        return BytesResponse(render_series_csv(points, channel))


def render_publication(pub: Publication) -> bytes:
    """Line-protocol rendering of one publication for a subscriber: the
    snapshot, then one ALARM record per event:
    ``ALARM <RAISED|CLEARED> <rule> <addr> <value> <seq>``"""
    out = [render_snapshot(pub.snapshot)]
    for ev in pub.events:
        out.append(
            f"ALARM {ev.kind.value} {ev.rule_id} {ev.address} "
            f"{ev.value} {ev.seq}\n".encode("ascii")
        )
    return b"".join(out)


def publication_to_sse(pub: Publication) -> bytes:
    """SSE rendering of one publication: a snapshot event, then alarm events."""
    chunks = [f"event: snapshot\ndata: {json.dumps(snapshot_to_json(pub.snapshot))}\n\n"]
    for ev in pub.events:
        chunks.append(f"event: alarm\ndata: {json.dumps(alarm_to_json(ev))}\n\n")
    return "".join(chunks).encode("utf-8")
