/** Wire types mirroring the gateway HTTP+JSON vocabulary. */

export interface SnapshotEntry {
  addr: string;
  channel: string;
  value: number | null;
}

export interface SnapshotJson {
  seq: number;
  sim_time_ms: number;
  entries: SnapshotEntry[];
}

export interface NodeInfo {
  addr: string;
  role: string;
  position: [number, number];
  channels: string[];
  parent: string | null;
}

export interface NodesResponse {
  nodes: NodeInfo[];
  max_depth: number;
}

export interface AlarmEventJson {
  kind: "RAISED" | "CLEARED";
  rule: string;
  addr: string;
  value: number;
  seq: number;
}

export interface AlertRuleJson {
  id: string;
  channel: string;
  scope: string; // "ALL" or a node address
  comparator: "GE" | "LE";
  threshold: number;
  consecutive: number;
}

export interface ActiveAlarmJson {
  rule: string;
  addr: string;
  value: number | null;
  seq: number | null;
  acknowledged: boolean;
}

export interface SeriesResponse {
  addr: string;
  channel: string;
  points: { seq: number; sim_time_ms: number; value: number | null }[];
}
