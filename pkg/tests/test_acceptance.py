"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with: pytest tests/test_acceptance.py -v -s
"""

import functools
import random
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest

from minewatch.alerting import AlertEngine
from minewatch.config import RunConfig
from minewatch.environment import Channel
from minewatch.gateway import Gateway, build_snapshot, render_snapshot
from minewatch.netsim import (
    Frame,
    FrameKind,
    LinkModel,
    SimConfig,
    decode_frame,
    encode_frame,
    run_sim,
)
from minewatch.sensing import Reading
from minewatch.server import GatewayServer
from minewatch.topology import (
    NodeAddress,
    NodeSpec,
    Role,
    Topology,
    parent,
    parse_topology,
    render_topology,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
A = NodeAddress.parse

LEAFLETS = {A("1.1"), A("1.2"), A("2.1"), A("2.2")}
HEADS = {A("1"), A("2")}


def criterion(number, title):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {number} {title}: FAIL", flush=True)
                raise
            print(f"ACCEPTANCE {number} {title}: PASS", flush=True)

        return wrapper

    return deco


def simulate(cfg, *, link=None, sim=None):
    return run_sim(cfg.topology, cfg.environment, cfg.sensors, link or cfg.link, sim or cfg.sim)


@criterion(1, "paper experiment replication")
def test_paper_experiment_structure(tmp_path):
    cfg = RunConfig.load(CONFIG_DIR / "paper.toml")
    assert cfg.sim.rounds == 600 and cfg.link.loss_prob == 0.0

    gw = Gateway(cfg.topology, snapshot_path=tmp_path / "snapshot.txt")
    count = 0
    for result in simulate(cfg):
        snap = build_snapshot(result, cfg.topology)
        gw.publish(snap)
        assert len(snap.entries) == 12
        assert sum(1 for e in snap.entries if e.value is None) == 0
        count += 1
    assert count == 600

    # and the CLI completes the same run in < 5 s wall clock in --fast mode
    start = time.monotonic()
    proc = subprocess.run(
        [
            sys.executable, "-m", "minewatch.cli", "run",
            "--config", str(CONFIG_DIR / "paper.toml"), "--fast",
            "--snapshot-file", str(tmp_path / "cli-snap.txt"),
        ],
        capture_output=True,
    )
    elapsed = time.monotonic() - start
    assert proc.returncode == 0, proc.stderr.decode()
    assert elapsed < 5.0, f"--fast run took {elapsed:.2f}s"
    assert (tmp_path / "cli-snap.txt").read_bytes().startswith(b"SNAPSHOT 599 599000\n")


@criterion(2, "dropout statistics vs analytic oracle")
def test_dropout_statistics():
    cfg = RunConfig.load(CONFIG_DIR / "paper.toml")
    link = LinkModel(max_range_m=30.0, loss_prob=0.05)
    sim = SimConfig(rounds=10_000, seed=42)
    leaf_null = leaf_obs = head_null = head_obs = 0
    for r in simulate(cfg, link=link, sim=sim):
        for (addr, _), value in r.readings.items():
            if addr in LEAFLETS:
                leaf_obs += 1
                leaf_null += value is None
            else:
                head_obs += 1
                head_null += value is None
    leaf_expect = 1 - 0.95**4  # poll->head, poll->leaflet, reply, aggregate
    head_expect = 1 - 0.95**2  # poll->head, aggregate
    assert abs(leaf_null / leaf_obs - leaf_expect) < 0.01, leaf_null / leaf_obs
    assert abs(head_null / head_obs - head_expect) < 0.01, head_null / head_obs


@criterion(3, "byte-identical replay with equal seeds")
def test_determinism():
    cfg = RunConfig.load(CONFIG_DIR / "paper_lossy.toml")
    assert cfg.sim.seed == 42

    def trace():
        rendered = []
        log_lines = []
        for r in simulate(cfg):
            rendered.append(render_snapshot(build_snapshot(r, cfg.topology)))
            log_lines.extend(rec.render() for rec in r.delivery_log)
        return b"".join(rendered), "\n".join(log_lines)

    snaps_a, log_a = trace()
    snaps_b, log_b = trace()
    assert snaps_a == snaps_b
    assert log_a == log_b


@criterion(4, "subtree atomicity under loss")
def test_subtree_atomicity():
    cfg = RunConfig.load(CONFIG_DIR / "paper_lossy.toml")
    sim = SimConfig(rounds=2_000, seed=42)
    head_loss_rounds = 0
    for r in simulate(cfg, sim=sim):
        fate = {(rec.kind, rec.src, rec.dst): rec.delivered for rec in r.delivery_log}
        for head in HEADS:
            poll_ok = fate.get((FrameKind.INTCALL, A("0"), head), False)
            agg_ok = fate.get((FrameKind.AGGREGATE, head, A("0")), False)
            if poll_ok and agg_ok:
                continue
            head_loss_rounds += 1
            for (addr, _), value in r.readings.items():
                if addr == head or parent(addr) == head:
                    assert value is None, f"round {r.round}: {addr} escaped head-loss NULL"
    assert head_loss_rounds > 100  # the property was actually exercised


@criterion(5, "multi-client consistency and torn-read freedom")
def test_multi_client_consistency(tmp_path):
    cfg = RunConfig.load(CONFIG_DIR / "paper.toml")
    gw = Gateway(cfg.topology, snapshot_path=tmp_path / "snapshot.txt")
    server = GatewayServer(gw, tcp="127.0.0.1:0")
    server.start()
    try:
        results = iter(simulate(cfg, sim=SimConfig(rounds=220, seed=42)))

        # fixed seq: 10 concurrent snapshot requests return identical bodies
        gw.publish(build_snapshot(next(results), cfg.topology))
        expected = render_snapshot(gw.current())
        bodies = [None] * 10

        def fetch(i):
            with socket.create_connection(server.tcp_address, timeout=5) as s:
                s.sendall(b"GET SNAPSHOT\n")
                chunks = []
                while True:
                    data = s.recv(65536)
                    if not data:
                        break
                    chunks.append(data)
                bodies[i] = b"".join(chunks)

        threads = [threading.Thread(target=fetch, args=(i,)) for i in range(10)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(b == expected for b in bodies)

        # subscriber across 100 publications: strictly increasing, gap-free
        seqs = []
        ready = threading.Event()

        def subscriber():
            with socket.create_connection(server.tcp_address, timeout=10) as s:
                s.sendall(b"SUBSCRIBE\n")
                ready.set()
                f = s.makefile("rb")
                while len(seqs) < 100:
                    line = f.readline()
                    if not line:
                        break
                    if line.startswith(b"SNAPSHOT"):
                        seqs.append(int(line.split()[1]))

        sub_thread = threading.Thread(target=subscriber)
        sub_thread.start()
        ready.wait(5)
        time.sleep(0.2)

        # torn-read hammer runs while the next 100+ publications happen
        stop = threading.Event()
        malformed = []
        reads = [0]
        path = tmp_path / "snapshot.txt"

        def hammer():
            while not stop.is_set():
                data = path.read_bytes()
                reads[0] += 1
                lines = data.decode(errors="replace").splitlines()
                if not (
                    data.endswith(b"END\n")
                    and lines
                    and lines[0].startswith("SNAPSHOT ")
                    and all(l.startswith("NODE ") for l in lines[1:-1])
                    and len(lines) == 8
                ):
                    malformed.append(data[:80])

        hammer_threads = [threading.Thread(target=hammer) for _ in range(3)]
        for t in hammer_threads:
            t.start()

        published = 0
        for result in results:
            gw.publish(build_snapshot(result, cfg.topology))
            published += 1
        assert published >= 100
        sub_thread.join(timeout=15)
        stop.set()
        for t in hammer_threads:
            t.join()

        assert len(seqs) == 100
        assert all(b == a + 1 for a, b in zip(seqs, seqs[1:])), "gap or reorder in subscription"
        assert reads[0] > 100, "hammer never exercised the file"
        assert malformed == [], f"torn reads: {malformed[:3]}"
    finally:
        server.stop()


@criterion(6, "cluster filtering")
def test_cluster_filtering(tmp_path):
    cfg = RunConfig.load(CONFIG_DIR / "paper.toml")
    gw = Gateway(cfg.topology, snapshot_path=tmp_path / "snapshot.txt")
    result = next(iter(simulate(cfg, sim=SimConfig(rounds=1, seed=42))))
    gw.publish(build_snapshot(result, cfg.topology))

    body = gw.handle_request("GET CLUSTER 1\n").data.decode()
    node_lines = [l for l in body.splitlines() if l.startswith("NODE")]
    assert [l.split()[1] for l in node_lines] == ["1", "1.1", "1.2"]
    entries = sum(len(l.split()) - 2 for l in node_lines)
    assert entries == 6

    assert gw.handle_request("GET CLUSTER 0\n").data == gw.handle_request("GET SNAPSHOT\n").data


@criterion(7, "leak-to-alarm latency")
def test_leak_alarm_latency():
    cfg = RunConfig.load(CONFIG_DIR / "mine_leak.toml")
    assert cfg.link.loss_prob == 0.0
    rule = cfg.alerts[0]
    assert rule.consecutive == 3 and rule.channel is Channel.CH4_PPM

    engine = AlertEngine(cfg.alerts)
    first_satisfying = {}
    raised = {}
    for result in simulate(cfg):
        snap = build_snapshot(result, cfg.topology)
        for e in snap.entries:
            if e.channel is Channel.CH4_PPM and e.value is not None and rule.satisfied(e.value):
                first_satisfying.setdefault(e.address, snap.seq)
        for event in engine.evaluate(snap):
            if event.kind.value == "RAISED":
                raised.setdefault(event.address, event.seq)
    assert raised, "leak never raised an alarm"
    for addr, seq in raised.items():
        assert seq == first_satisfying[addr] + 2, (
            f"{addr}: raised at {seq}, first satisfying {first_satisfying[addr]}"
        )
    # the leak is local: only subtree 2 is inside the radius
    assert set(raised) == {A("2"), A("2.1"), A("2.2")}


def _random_address(rng, max_extra=3):
    return NodeAddress(tuple(rng.randint(1, 20) for _ in range(rng.randint(1, max_extra))))


def _random_frame(rng):
    kind = rng.choice(list(FrameKind))
    round_index = rng.randint(0, 10**6)
    if kind is FrameKind.INTCALL:
        dst = _random_address(rng)
        return Frame(kind, parent(dst), dst, round_index)
    src = _random_address(rng)
    payload = []
    for _ in range(rng.randint(0, 4)):
        if kind is FrameKind.DATAREPLY:
            addr = src
        else:
            suffix = tuple(rng.randint(1, 20) for _ in range(rng.randint(0, 2)))
            addr = NodeAddress(src.path + suffix)
        channel = rng.choice(list(Channel))
        if rng.random() < 0.25:
            value = None
        elif channel.wire_decimals == 1:
            value = rng.randint(-(10**6), 10**6) / 10
        else:
            value = float(rng.randint(-(10**6), 10**6))
        payload.append(Reading(addr, channel, round_index, float(round_index), value))
    return Frame(kind, src, parent(src), round_index, tuple(payload))


def _random_topology(rng):
    max_depth = rng.randint(1, 3)
    nodes = {}

    def grow(path):
        addr = NodeAddress(path)
        n_children = rng.randint(0, 3) if len(path) < max_depth else 0
        if not path:
            role = Role.BASE_STATION
        elif n_children:
            role = Role.CLUSTER_HEAD
        else:
            role = Role.END_DEVICE
        channels = frozenset(rng.sample(list(Channel), rng.randint(0, 4)))
        position = (rng.uniform(-1000, 1000), rng.uniform(-1000, 1000))
        nodes[addr] = NodeSpec(addr, role, position, channels)
        for i in range(1, n_children + 1):
            grow(path + (i,))

    grow(())
    return Topology(nodes=nodes, max_depth=max_depth)


@criterion(8, "codec and parser round-trips")
def test_round_trips():
    rng = random.Random(20240608)
    for _ in range(10_000):
        frame = _random_frame(rng)
        assert decode_frame(encode_frame(frame)) == frame
    for _ in range(1_000):
        topo = _random_topology(rng)
        text = render_topology(topo)
        again = parse_topology(text)
        assert again == topo
        assert render_topology(again) == text
