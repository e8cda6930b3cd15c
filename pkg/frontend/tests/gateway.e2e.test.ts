/** Console end-to-end against a live gateway subprocess.
 *
 * Exercises the real HTTP+SSE interface with the console's client and view
 * model (the DOM layer is a thin projection of that model): panel count,
 * cluster narrowing, NULL gaps under forced loss, reconnect/resync without
 * duplicates, and a CH4 alarm raised and acknowledged through the UI path.
 */

import assert from "node:assert/strict";
import { after, test } from "node:test";
import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { fileURLToPath } from "node:url";
import * as path from "node:path";

import { GatewayClient } from "../src/client.js";
import { ConsoleModel } from "../src/model.js";
import type { AlarmEventJson, SnapshotJson } from "../src/types.js";

const REPO_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..", "..", "..");
const CONFIG_DIR = path.join(REPO_ROOT, "configs");
const PYTHON = process.env.MINEWATCH_PYTHON ?? "python3";

const scratch = mkdtempSync(path.join(tmpdir(), "minewatch-console-"));
const children: ChildProcess[] = [];

after(() => {
  for (const child of children) child.kill("SIGTERM");
});

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as { port: number }).port;
      srv.close(() => resolve(port));
    });
    srv.on("error", reject);
  });
}

function spawnGateway(configPath: string, port: number, extra: string[] = []): ChildProcess {
  const child = spawn(
    PYTHON,
    [
      "-m", "minewatch.cli", "run",
      "--config", configPath,
      "--http", `127.0.0.1:${port}`,
      "--snapshot-file", path.join(scratch, `snap-${port}.txt`),
      ...extra,
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  children.push(child);
  return child;
}

async function waitFor<T>(what: string, timeoutMs: number, poll: () => T | null | Promise<T | null>): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const got = await poll();
    if (got !== null) return got;
    await new Promise((r) => setTimeout(r, 50));
  }
  throw new Error(`timed out waiting for ${what}`);
}

function retuned(baseConfig: string, sim: { interval: number; rounds: number }, eventTweaks?: { start: number; rise: number }): string {
  let text = readFileSync(path.join(CONFIG_DIR, baseConfig), "utf-8");
  text = text.replace(/round_interval = [\d.]+/, `round_interval = ${sim.interval}`);
  text = text.replace(/rounds = \d+/, `rounds = ${sim.rounds}`);
  if (eventTweaks) {
    text = text.replace(/start_time = [\d.]+/, `start_time = ${eventTweaks.start}`);
    text = text.replace(/rise_time_constant = [\d.]+/, `rise_time_constant = ${eventTweaks.rise}`);
  }
  const out = path.join(scratch, `tuned-${baseConfig}`);
  writeFileSync(out, text);
  return out;
}

test("live paper.toml: 6 panels, cluster narrows within one publication interval", async () => {
  const port = await freePort();
  const child = spawnGateway(path.join(CONFIG_DIR, "paper.toml"), port, ["--rounds", "120"]);
  try {
    const client = new GatewayClient(`http://127.0.0.1:${port}`);
    const model = new ConsoleModel();

    const nodes = await waitFor("nodes endpoint", 15_000, () => client.fetchNodes().catch(() => null));
    model.setNodes(nodes.nodes);
    assert.equal(model.visiblePanels().length, 6, "paper topology shows 6 node panels");
    assert.equal(nodes.nodes.length, 7);

    const seqs: number[] = [];
    const handle = client.stream(
      {
        onSnapshot(s: SnapshotJson) {
          if (model.ingestSnapshot(s)) seqs.push(s.seq);
        },
        onAlarm() {},
        onStatus(up) {
          model.setConnected(up);
        },
      },
      { initialBackoffMs: 100 },
    );

    await waitFor("two live publications", 15_000, () => (seqs.length >= 2 ? true : null));
    assert.equal(model.connected, true);

    // cluster selection narrows the panels immediately (well under one interval)
    const before = Date.now();
    model.selectCluster("1");
    const narrowed = model.visiblePanels().map((n) => n.addr);
    const tookMs = Date.now() - before;
    assert.deepEqual(narrowed, ["1", "1.1", "1.2"]);
    assert.ok(tookMs < 1000, `narrowing took ${tookMs}ms`);

    // the next publication still renders only filtered panels' data
    const seen = seqs.length;
    await waitFor("one more publication", 15_000, () => (seqs.length > seen ? true : null));
    for (const node of model.visiblePanels()) {
      assert.ok(model.seriesFor(node.addr, "TEMP_C").length > 0);
    }

    handle.stop();
    await handle.done;
  } finally {
    child.kill("SIGTERM");
  }
});

test("forced-loss run: NULL gaps, and restart resyncs without duplicates", async () => {
  const port = await freePort();
  const config = retuned("paper_lossy.toml", { interval: 0.05, rounds: 2000 });
  let child = spawnGateway(config, port);
  const client = new GatewayClient(`http://127.0.0.1:${port}`);
  const model = new ConsoleModel(10_000);
  const seqs: number[] = [];

  const handle = client.stream(
    {
      onSnapshot(s: SnapshotJson) {
        if (model.ingestSnapshot(s)) seqs.push(s.seq);
      },
      onAlarm() {},
    },
    { initialBackoffMs: 100 },
  );

  try {
    await waitFor("60 publications", 30_000, () => (seqs.length >= 60 ? true : null));

    // NULL readings arrived and map 1:1 to chart gaps, never bridged
    const leaflets = ["1.1", "1.2", "2.1", "2.2"];
    let totalNulls = 0;
    for (const addr of leaflets) {
      const series = model.seriesFor(addr, "TEMP_C");
      const nulls = series.filter((p) => p.value === null).length;
      totalNulls += nulls;
      const segments = model.chartSegments(addr, "TEMP_C");
      const numeric = segments.reduce((n, s) => n + s.points.length, 0);
      assert.equal(numeric + nulls, series.length, "every reading is a point or a gap");
      // a gap between consecutive segments means a NULL sits between them
      for (let i = 1; i < segments.length; i++) {
        const prevEnd = segments[i - 1].points.at(-1)!.seq;
        const nextStart = segments[i].points[0].seq;
        const between = series.filter((p) => p.seq > prevEnd && p.seq < nextStart);
        assert.ok(between.length > 0 && between.every((p) => p.value === null));
      }
    }
    assert.ok(totalNulls > 0, `forced-loss run produced no NULLs over ${seqs.length} rounds`);

    // kill and restart the gateway: the console reconnects and resyncs;
    // republished stale seqs are dropped, so the stream stays duplicate-free
    child.kill("SIGTERM");
    await new Promise((r) => child.on("exit", r));
    const seenBeforeRestart = seqs.length;
    child = spawnGateway(config, port);
    await waitFor("post-restart ingest", 30_000, () => (seqs.length > seenBeforeRestart ? true : null));

    for (let i = 1; i < seqs.length; i++) {
      assert.ok(seqs[i] > seqs[i - 1], `duplicate or reordered seq after restart: ${seqs[i - 1]} -> ${seqs[i]}`);
    }
  } finally {
    handle.stop();
    await handle.done;
    child.kill("SIGTERM");
  }
});

test("CH4 leak: alarm raises on the stream and acknowledges through the UI path", async () => {
  const port = await freePort();
  // same scenario, faster clock so the leak crosses the threshold in seconds
  const config = retuned("mine_leak.toml", { interval: 0.02, rounds: 4000 }, { start: 1.0, rise: 0.5 });
  const child = spawnGateway(config, port);
  try {
    const client = new GatewayClient(`http://127.0.0.1:${port}`);
    const model = new ConsoleModel();
    const nodes = await waitFor("nodes endpoint", 15_000, () => client.fetchNodes().catch(() => null));
    model.setNodes(nodes.nodes);

    const raised: AlarmEventJson[] = [];
    const handle = client.stream(
      {
        onSnapshot(s) {
          model.ingestSnapshot(s);
        },
        onAlarm(ev) {
          model.ingestAlarm(ev);
          if (ev.kind === "RAISED") raised.push(ev);
        },
      },
      { initialBackoffMs: 100 },
    );

    await waitFor("CH4 alarm", 60_000, () => (raised.length > 0 ? true : null));
    const alarm = raised[0];
    assert.equal(alarm.rule, "ch4-high");
    assert.ok(["2", "2.1", "2.2"].includes(alarm.addr), `leak is local to subtree 2, got ${alarm.addr}`);
    assert.ok(model.activeAlarms().some((a) => a.addr === alarm.addr && !a.acknowledged));

    // acknowledge exactly as the banner button does
    await client.acknowledge(alarm.rule, alarm.addr);
    model.markAcknowledged(alarm.rule, alarm.addr);
    assert.ok(model.activeAlarms().some((a) => a.addr === alarm.addr && a.acknowledged));

    // the gateway agrees the alarm is still active and acknowledged
    const { alarms } = await client.activeAlarms();
    const server = alarms.find((a) => a.rule === alarm.rule && a.addr === alarm.addr);
    assert.ok(server, "alarm still active on the gateway");
    assert.equal(server!.acknowledged, true);

    // duplicate rule ids are rejected server-side (surfaced inline in the UI)
    await assert.rejects(
      client.addRule({ id: "ch4-high", channel: "CH4_PPM", threshold: 1, comparator: "GE" }),
      /duplicate/i,
    );

    handle.stop();
    await handle.done;
  } finally {
    child.kill("SIGTERM");
  }
});
