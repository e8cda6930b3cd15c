"""Command-line entry point: run simulations, serve the gateway, export series.

Exit codes: 0 clean completion, 2 config/usage errors, 3 endpoint bind failure.
Log level comes from the MINEWATCH_LOG environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time

from .alerting import AlertEngine
from .config import ConfigError, RunConfig
from .environment import Channel, UnknownChannelError
from .gateway import Gateway, build_snapshot, render_series_csv, SeriesPoint
from .netsim import run_sim
from .server import GatewayServer
from .topology import NodeAddress, TopologyError

log = logging.getLogger(__name__)


def _configure_logging() -> None:
    level = os.environ.get("MINEWATCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minewatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a simulation and publish snapshots")
    run_p.add_argument("--config", required=True, help="run-config TOML file")
    run_p.add_argument("--seed", type=int, default=None, help="override [sim] seed")
    run_p.add_argument("--rounds", type=int, default=None, help="override [sim] rounds")
    run_p.add_argument("--fast", action="store_true", help="no wall-clock pacing (batch mode)")
    run_p.add_argument("--serve", default=None, metavar="TCP-ADDR", help="line-protocol endpoint, host:port")
    run_p.add_argument("--http", default=None, metavar="ADDR", help="HTTP+JSON endpoint, host:port")
    run_p.add_argument("--snapshot-file", default=None, help="snapshot file path (overrides [output])")
    run_p.add_argument("--out", default=None, metavar="DIR", help="output directory")
    run_p.add_argument("--console", default=None, metavar="DIR", help="serve this directory as the web console")

    export_p = sub.add_parser("export", help="replay the config and export one series as CSV")
    export_p.add_argument("--config", required=True, help="run-config TOML file")
    export_p.add_argument("--addr", required=True, help="node address, e.g. 1.1")
    export_p.add_argument("--channel", required=True, help="channel id, e.g. TEMP_C")
    export_p.add_argument("--csv", default=None, help="output CSV path (default <out>/<addr>_<channel>.csv)")
    export_p.add_argument("--seed", type=int, default=None, help="override [sim] seed")
    export_p.add_argument("--rounds", type=int, default=None, help="override [sim] rounds")
    export_p.add_argument("--out", default=None, metavar="DIR", help="output directory")
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    sim = cfg.sim
    if args.seed is not None:
        sim = dataclasses.replace(sim, seed=args.seed)
    if args.rounds is not None:
        sim = dataclasses.replace(sim, rounds=args.rounds)
    if sim is not cfg.sim:
        cfg = dataclasses.replace(cfg, sim=sim)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, dir=args.out))
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
    except ConfigError as e:
        print(f"minewatch: config error: {e}", file=sys.stderr)
        return 2

    snapshot_path = args.snapshot_file or cfg.output.snapshot_path()
    snapshot_dir = os.path.dirname(snapshot_path)
    if snapshot_dir:
        os.makedirs(snapshot_dir, exist_ok=True)

    gw = Gateway(
        cfg.topology,
        snapshot_path=snapshot_path,
        history=cfg.gateway.history,
        alerts=AlertEngine(cfg.alerts),
    )

    tcp = args.serve or cfg.gateway.tcp
    http = args.http or cfg.gateway.http
    server = None
    if tcp or http:
        try:
            server = GatewayServer(gw, tcp=tcp, http=http, console_dir=args.console)
            server.start()
        except OSError as e:
            print(f"minewatch: bind failure: {e}", file=sys.stderr)
            return 3
        if server.tcp_address:
            log.info("line protocol on %s:%d", *server.tcp_address)
        if server.http_address:
            log.info("http api on %s:%d", *server.http_address)

    interrupted = False
    start = time.monotonic()
    try:
        for result in run_sim(cfg.topology, cfg.environment, cfg.sensors, cfg.link, cfg.sim):
            events = gw.publish(build_snapshot(result, cfg.topology))
            for ev in events:
                log.info("alarm %s rule=%s addr=%s value=%s seq=%d", ev.kind.value, ev.rule_id, ev.address, ev.value, ev.seq)
            if not args.fast:
                delay = start + (result.round + 1) * cfg.sim.round_interval - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
    except KeyboardInterrupt:
        interrupted = True
    finally:
        gw.drain()
        if server is not None:
            server.stop()
    return 130 if interrupted else 0


def cmd_export(args) -> int:
    try:
        cfg = _load_config(args)
    except ConfigError as e:
        print(f"minewatch: config error: {e}", file=sys.stderr)
        return 2
    try:
        addr = NodeAddress.parse(args.addr)
        channel = Channel.from_id(args.channel)
    except (TopologyError, UnknownChannelError) as e:
        print(f"minewatch: {e}", file=sys.stderr)
        return 2
    if (addr, channel) not in cfg.topology.sensing_pairs():
        print(f"minewatch: node {args.addr} does not sense {args.channel}", file=sys.stderr)
        return 2

    points = []
    for result in run_sim(cfg.topology, cfg.environment, cfg.sensors, cfg.link, cfg.sim):
        points.append(SeriesPoint(result.round, round(result.sim_time * 1000), result.readings[(addr, channel)]))

    csv_path = args.csv or os.path.join(cfg.output.dir, f"{args.addr}_{args.channel}.csv")
    csv_dir = os.path.dirname(csv_path)
    if csv_dir:
        os.makedirs(csv_dir, exist_ok=True)
    with open(csv_path, "wb") as f:
        f.write(render_series_csv(points, channel))
    print(f"wrote {len(points)} rows to {csv_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return cmd_export(args)


if __name__ == "__main__":
    sys.exit(main())
