"""Concurrent network frontends for the gateway.

Two listeners share one Gateway: a TCP line-protocol server (one request
per connection; SUBSCRIBE holds the connection open and streams) and an
HTTP+JSON server mapping the same requests plus alert management, with a
server-sent-events stream at /api/stream. Per-client I/O failures are
isolated; a misbehaving client cannot stall publication or other clients.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import queue
import socketserver
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .alerting import (
    AlertRule,
    Comparator,
    DuplicateRuleError,
    InactiveAlarmError,
    UnknownRuleError,
)
from .environment import Channel, UnknownChannelError
from .gateway import (
    BytesResponse,
    Gateway,
    StreamResponse,
    filter_snapshot,
    publication_to_sse,
    render_publication,
    snapshot_to_json,
)
from .topology import NodeAddress, parent

log = logging.getLogger(__name__)

_STREAM_POLL_S = 0.25


def parse_endpoint(text: str) -> tuple[str, int]:
    """Parse "host:port" (or bare "port", defaulting to 127.0.0.1)."""
    if ":" in text:
        host, _, port = text.rpartition(":")
        return host or "127.0.0.1", int(port)
    return "127.0.0.1", int(text)


class LineProtocolServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], gateway: Gateway) -> None:
        super().__init__(address, _LineHandler)
        self.gateway = gateway


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        gw: Gateway = self.server.gateway
        try:
            line = self.rfile.readline(4096).decode("ascii", errors="replace")
        except OSError:
            return
        if not line:
            return
        response = gw.handle_request(line)
        try:
            if isinstance(response, BytesResponse):
                self.wfile.write(response.data)
                return
            self._stream(gw, response)
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass

    def _stream(self, gw: Gateway, response: StreamResponse) -> None:
        sub = response.subscription
        try:
            while True:
                try:
                    pub = sub.queue.get(timeout=_STREAM_POLL_S)
                except queue.Empty:
                    if sub.overflowed:
                        self.wfile.write(b"ERR 503 subscriber too slow\n")
                        return
                    if gw.closing.is_set():
                        return
                    continue
                self.wfile.write(render_publication(pub))
        finally:
            gw.unsubscribe(sub)


class ApiHTTPServer(ThreadingHTTPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], gateway: Gateway, console_dir: str | None = None) -> None:
        super().__init__(address, _ApiHandler)
        self.gateway = gateway
        self.console_dir = console_dir


class _ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: ApiHTTPServer

    # -- plumbing ------------------------------------------------------

    def log_message(self, format: str, *args) -> None:
        log.debug("http %s - %s", self.address_string(), format % args)

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def _read_body_json(self) -> dict | None:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            parsed = json.loads(raw or b"{}")
        except json.JSONDecodeError:
            return None
        return parsed if isinstance(parsed, dict) else None

    # -- routing ------------------------------------------------------

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        url = urlparse(self.path)
        params = parse_qs(url.query)
        try:
            if url.path == "/api/snapshot":
                self._get_snapshot(params)
            elif url.path == "/api/nodes":
                self._get_nodes()
            elif url.path == "/api/series":
                self._get_series(params)
            elif url.path == "/api/stream":
                self._get_stream(params)
            elif url.path == "/api/alerts/rules":
                self._get_rules()
            elif url.path == "/api/alerts/active":
                self._get_active()
            else:
                self._static(url.path)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def do_POST(self) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if url.path == "/api/alerts/rules":
                self._post_rule()
            elif len(parts) == 5 and parts[:2] == ["api", "alerts"] and parts[4] == "ack":
                self._post_ack(parts[2:4])
            else:
                self._error(404, "not found")
        except (BrokenPipeError, ConnectionResetError):
            pass

    def do_DELETE(self) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if len(parts) == 4 and parts[:3] == ["api", "alerts", "rules"]:
            try:
                self.server.gateway.alerts_call(lambda a: a.remove_rule(parts[3]))
            except UnknownRuleError as e:
                self._error(404, str(e))
                return
            self._send_json(200, {"ok": True})
        else:
            self._error(404, "not found")

    # -- endpoint bodies ------------------------------------------------

    def _parse_cluster(self, params) -> tuple[NodeAddress | None, bool]:
        """Returns (cluster, ok); reports the error itself when not ok."""
        raw = params.get("cluster", [None])[0]
        if raw is None:
            return None, True
        try:
            cluster = NodeAddress.parse(raw)
        except ValueError:
            self._error(400, f"bad address {raw}")
            return None, False
        if cluster not in self.server.gateway.topo:
            self._error(404, f"unknown address {raw}")
            return None, False
        return cluster, True

    def _get_snapshot(self, params) -> None:
        gw = self.server.gateway
        cluster, ok = self._parse_cluster(params)
        if not ok:
            return
        snapshot = gw.current()
        if snapshot is None:
            self._error(409, "no snapshot published yet")
            return
        if cluster is not None:
            snapshot = filter_snapshot(snapshot, cluster)
        self._send_json(200, snapshot_to_json(snapshot))

    def _get_nodes(self) -> None:
        gw = self.server.gateway
        nodes = []
        for spec in gw.topo.nodes.values():
            nodes.append(
                {
                    "addr": str(spec.address),
                    "role": spec.role.value,
                    "position": list(spec.position),
                    "channels": [c.value for c in spec.sorted_channels()],
                    "parent": None if spec.address.is_base else str(parent(spec.address)),
                }
            )
        self._send_json(200, {"nodes": nodes, "max_depth": gw.topo.max_depth})

    def _get_series(self, params) -> None:
        gw = self.server.gateway

        def param(name: str) -> str | None:
            return params.get(name, [None])[0]

        raw_addr, raw_channel = param("addr"), param("channel")
        if raw_addr is None or raw_channel is None:
            self._error(400, "addr and channel are required")
            return
        try:
            addr = NodeAddress.parse(raw_addr)
        except ValueError:
            self._error(400, f"bad address {raw_addr}")
            return
        try:
            channel = Channel.from_id(raw_channel)
        except UnknownChannelError as e:
            self._error(404, str(e))
            return
        if not gw.store.known(addr, channel):
            self._error(404, f"no series for {raw_addr} {raw_channel}")
            return
        try:
            from_seq = int(param("from") or 0)
            to_seq = int(param("to") or (1 << 62))
        except ValueError:
            self._error(400, "series window must be integers")
            return
        points = gw.series(addr, channel, from_seq, to_seq)
        self._send_json(
            200,
            {
                "addr": raw_addr,
                "channel": channel.value,
                "points": [{"seq": p.seq, "sim_time_ms": p.sim_time_ms, "value": p.value} for p in points],
            },
        )

    def _get_stream(self, params) -> None:
        gw = self.server.gateway
        cluster, ok = self._parse_cluster(params)
        if not ok:
            return
        sub = gw.subscribe(cluster)
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(b"retry: 2000\n\n")
            self.wfile.flush()
            while True:
                try:
                    pub = sub.queue.get(timeout=_STREAM_POLL_S)
                except queue.Empty:
                    if sub.overflowed or gw.closing.is_set():
                        return
                    continue
                self.wfile.write(publication_to_sse(pub))
                self.wfile.flush()
        finally:
            gw.unsubscribe(sub)
            self.close_connection = True

    def _get_rules(self) -> None:
        rules = self.server.gateway.alerts_call(lambda a: a.list_rules())
        self._send_json(200, {"rules": [_rule_to_json(r) for r in rules]})

    def _get_active(self) -> None:
        alarms = self.server.gateway.alerts_call(lambda a: a.active_alarms())
        self._send_json(
            200,
            {
                "alarms": [
                    {
                        "rule": al.rule_id,
                        "addr": str(al.address),
                        "value": al.value,
                        "seq": al.seq,
                        "acknowledged": al.acknowledged,
                    }
                    for al in alarms
                ]
            },
        )

    def _post_rule(self) -> None:
        body = self._read_body_json()
        if body is None:
            self._error(400, "body must be a JSON object")
            return
        try:
            rule = rule_from_json(body)
        except (KeyError, ValueError) as e:
            self._error(400, f"bad rule: {e}")
            return
        try:
            self.server.gateway.alerts_call(lambda a: a.add_rule(rule))
        except DuplicateRuleError as e:
            self._error(409, str(e))
            return
        self._send_json(201, _rule_to_json(rule))

    def _post_ack(self, parts: list[str]) -> None:
        rule_id, raw_addr = parts
        try:
            addr = NodeAddress.parse(raw_addr)
        except ValueError:
            self._error(400, f"bad address {raw_addr}")
            return
        try:
            self.server.gateway.alerts_call(lambda a: a.acknowledge(rule_id, addr))
        except UnknownRuleError as e:
            self._error(404, str(e))
            return
        except InactiveAlarmError as e:
            self._error(409, str(e))
            return
        self._send_json(200, {"ok": True})

    # -- static console files -------------------------------------------

    def _static(self, path: str) -> None:
        root = self.server.console_dir
        if root is None:
            self._error(404, "not found")
            return
        rel = path.lstrip("/") or "index.html"
        full = os.path.realpath(os.path.join(root, rel))
        if not full.startswith(os.path.realpath(root) + os.sep) and full != os.path.realpath(root):
            self._error(404, "not found")
            return
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            self._error(404, "not found")
            return
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as f:
            body = f.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def _rule_to_json(rule: AlertRule) -> dict:
    return {
        "id": rule.id,
        "channel": rule.channel.value,
        "scope": rule.scope_id(),
        "comparator": rule.comparator.value,
        "threshold": rule.threshold,
        "consecutive": rule.consecutive,
    }


def rule_from_json(body: dict) -> AlertRule:
    scope_raw = body.get("scope", "ALL")
    scope = None if scope_raw in (None, "ALL") else NodeAddress.parse(str(scope_raw))
    return AlertRule(
        id=str(body["id"]),
        channel=Channel.from_id(str(body["channel"])),
        comparator=Comparator(str(body.get("comparator", "GE"))),
        threshold=float(body["threshold"]),
        scope=scope,
        consecutive=int(body.get("consecutive", 3)),
    )


class GatewayServer:
    """Facade owning both listeners; supports port 0 for tests."""

    def __init__(
        self,
        gateway: Gateway,
        *,
        tcp: str | None = None,
        http: str | None = None,
        console_dir: str | None = None,
    ) -> None:
        self.gateway = gateway
        self._tcp_server = LineProtocolServer(parse_endpoint(tcp), gateway) if tcp else None
        self._http_server = ApiHTTPServer(parse_endpoint(http), gateway, console_dir) if http else None
        self._threads: list[threading.Thread] = []

    @property
    def tcp_address(self) -> tuple[str, int] | None:
        return self._tcp_server.server_address if self._tcp_server else None

    @property
    def http_address(self) -> tuple[str, int] | None:
        return self._http_server.server_address if self._http_server else None

    def start(self) -> None:
        for server, name in ((self._tcp_server, "tcp"), (self._http_server, "http")):
            if server is None:
                continue
            t = threading.Thread(target=server.serve_forever, daemon=True, name=f"minewatch-{name}")
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self.gateway.close()
        for server in (self._tcp_server, self._http_server):
            if server is not None:
                server.shutdown()
                server.server_close()
        for t in self._threads:
            t.join(timeout=2.0)
        self._threads.clear()
