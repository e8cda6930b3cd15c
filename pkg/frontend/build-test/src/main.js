/** DOM wiring: the page is a thin projection of ConsoleModel. */
import { GatewayClient, GatewayError } from "./client.js";
import { drawChart } from "./charts.js";
import { ConsoleModel } from "./model.js";
const params = new URLSearchParams(location.search);
const base = params.get("gateway") ?? location.origin;
const client = new GatewayClient(base);
const model = new ConsoleModel(240);
const $ = (id) => document.getElementById(id);
const statusEl = $("status");
const panelsEl = $("panels");
const clusterEl = $("cluster");
const alarmsEl = $("alarms");
const rulesEl = $("rules");
const ruleFormEl = $("rule-form");
const ruleErrorEl = $("rule-error");
const charts = new Map();
function renderStatus() {
    statusEl.textContent = model.connected ? `connected - seq ${model.lastSeq ?? "-"}` : "disconnected, retrying...";
    statusEl.className = model.connected ? "ok" : "bad";
}
function panelKey(n, channel) {
    return `${n.addr}|${channel}`;
}
function renderPanels() {
    panelsEl.replaceChildren();
    charts.clear();
    for (const node of model.visiblePanels()) {
        const panel = document.createElement("div");
        panel.className = "panel";
        const title = document.createElement("h3");
        title.textContent = `node ${node.addr} (${node.role.replace("_", " ")})`;
        panel.appendChild(title);
        for (const channel of node.channels) {
            const label = document.createElement("div");
            label.className = "chart-label";
            panel.appendChild(label);
            const canvas = document.createElement("canvas");
            canvas.width = 300;
            canvas.height = 64;
            panel.appendChild(canvas);
            charts.set(panelKey(node, channel), canvas);
            label.textContent = channel;
        }
        panelsEl.appendChild(panel);
    }
    redrawCharts();
}
function redrawCharts() {
    for (const [key, canvas] of charts) {
        const [addr, channel] = key.split("|");
        drawChart(canvas, model.chartSegments(addr, channel), model.windowLength);
        const label = canvas.previousElementSibling;
        if (label) {
            const series = model.seriesFor(addr, channel);
            const last = series.length ? series[series.length - 1] : null;
            const shown = last === null ? "-" : last.value === null ? "NULL" : String(last.value);
            const gaps = model.nullCount(addr, channel);
            label.textContent = `${channel} = ${shown}${gaps ? `  (${gaps} NULL in window)` : ""}`;
        }
    }
}
function renderAlarms() {
    alarmsEl.replaceChildren();
    const active = model.activeAlarms();
    alarmsEl.className = active.some((a) => !a.acknowledged) ? "alarms raised" : "alarms";
    if (active.length === 0) {
        alarmsEl.textContent = "no active alarms";
        return;
    }
    for (const alarm of active) {
        const row = document.createElement("div");
        row.className = alarm.acknowledged ? "alarm acked" : "alarm";
        const text = document.createElement("span");
        text.textContent = `${alarm.rule} @ ${alarm.addr} value=${alarm.value ?? "?"} seq=${alarm.seq ?? "?"}${alarm.acknowledged ? " [ack]" : ""}`;
        row.appendChild(text);
        if (!alarm.acknowledged) {
            const btn = document.createElement("button");
            btn.textContent = "ack";
            btn.onclick = async () => {
                try {
                    await client.acknowledge(alarm.rule, alarm.addr);
                    model.markAcknowledged(alarm.rule, alarm.addr);
                    renderAlarms();
                }
                catch (e) {
                    text.textContent += ` (ack failed: ${e.message})`;
                }
            };
            row.appendChild(btn);
        }
        alarmsEl.appendChild(row);
    }
}
async function renderRules() {
    const { rules } = await client.listRules();
    rulesEl.replaceChildren();
    for (const rule of rules) {
        const row = document.createElement("div");
        row.className = "rule";
        const text = document.createElement("span");
        text.textContent = `${rule.id}: ${rule.channel} ${rule.comparator} ${rule.threshold} scope=${rule.scope} x${rule.consecutive}`;
        row.appendChild(text);
        const btn = document.createElement("button");
        btn.textContent = "remove";
        btn.onclick = async () => {
            await client.deleteRule(rule.id).catch(() => undefined);
            renderRules();
        };
        row.appendChild(btn);
        rulesEl.appendChild(row);
    }
}
ruleFormEl.onsubmit = async (ev) => {
    ev.preventDefault();
    const data = new FormData(ruleFormEl);
    ruleErrorEl.textContent = "";
    try {
        await client.addRule({
            id: String(data.get("id")),
            channel: String(data.get("channel")),
            scope: String(data.get("scope") || "ALL"),
            comparator: data.get("comparator") === "LE" ? "LE" : "GE",
            threshold: Number(data.get("threshold")),
            consecutive: Number(data.get("consecutive") || 3),
        });
        ruleFormEl.reset();
        renderRules();
    }
    catch (e) {
        ruleErrorEl.textContent = e instanceof GatewayError ? `rejected: ${e.message}` : String(e);
    }
};
clusterEl.onchange = () => {
    model.selectCluster(clusterEl.value);
    renderPanels();
    renderAlarms();
};
async function start() {
    const { nodes } = await client.fetchNodes();
    model.setNodes(nodes);
    clusterEl.replaceChildren(new Option("ALL", "ALL"));
    for (const addr of model.clusterChoices())
        clusterEl.appendChild(new Option(addr, addr));
    const { alarms } = await client.activeAlarms().catch(() => ({ alarms: [] }));
    model.setAlarms(alarms);
    renderPanels();
    renderAlarms();
    renderRules().catch(() => undefined);
    client.stream({
        onSnapshot(snapshot) {
            if (model.ingestSnapshot(snapshot)) {
                redrawCharts();
                renderStatus();
            }
        },
        onAlarm(event) {
            model.ingestAlarm(event);
            renderAlarms();
        },
        onStatus(connected) {
            model.setConnected(connected);
            renderStatus();
            if (connected) {
                // alarm state may have moved while we were away
                client.activeAlarms().then(({ alarms }) => {
                    model.setAlarms(alarms);
                    renderAlarms();
                }).catch(() => undefined);
            }
        },
    });
}
start().catch((e) => {
    statusEl.textContent = `gateway unreachable: ${e.message}`;
    statusEl.className = "bad";
    setTimeout(() => start().catch(() => undefined), 2000);
});
