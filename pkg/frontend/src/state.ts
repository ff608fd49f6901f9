// Console state: a pure fold over server records.  Nothing in here guesses
// semantics; every field is a restatement of something the server said, so a
// reconnect followed by the server's snapshot reproduces the identical view.

import type { Effect, ServerRecord, Snapshot, Tile } from "./protocol.js";

export interface TraceEntry {
  token: { kind: string; text: string };
  outcome: "consumed" | "ignored" | "form_completed" | "parse_error";
  diagnostic: string | null;
  stateAfter: string;
}

export interface RobotView {
  x: number;
  y: number;
  depth: number;
  heading: number;
  clock: number;
  snapshots: Snapshot[];
}

export interface ConsoleState {
  connection: "connecting" | "ready" | "closed";
  serverVersion: number | null;
  lastSeq: number | null;
  seqGap: boolean;
  keymap: { index: number; tiles: Tile[] } | null;
  window: { counts: Record<string, number>; total: number; threshold: number };
  pendingToken: { kind: string; text: string } | null;
  trace: TraceEntry[];
  lastAccepted: { gesture: number; ts: number } | null;
  env: { functions: Record<string, string[]>; variables: Record<string, number> };
  robot: RobotView | null;
  effects: Effect[];
  errors: string[];
}

export const TRACE_LIMIT = 200;

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    serverVersion: null,
    lastSeq: null,
    seqGap: false,
    keymap: null,
    window: { counts: {}, total: 0, threshold: 0 },
    pendingToken: null,
    trace: [],
    lastAccepted: null,
    env: { functions: {}, variables: {} },
    robot: null,
    effects: [],
    errors: [],
  };
}

export function render(state: ConsoleState, record: ServerRecord): ConsoleState {
  const next: ConsoleState = { ...state };
  if (state.lastSeq !== null && record.seq !== state.lastSeq + 1) {
    next.seqGap = true;
  }
  next.lastSeq = record.seq;

  switch (record.type) {
    case "hello":
      next.connection = "ready";
      next.serverVersion = record.version;
      break;
    case "keymap_changed":
      next.keymap = { index: record.index, tiles: record.tiles };
      break;
    case "env":
      next.env = { functions: record.functions, variables: record.variables };
      break;
    case "robot_state":
      next.robot = {
        x: record.x,
        y: record.y,
        depth: record.depth,
        heading: record.heading,
        clock: record.clock,
        snapshots: record.snapshots,
      };
      break;
    case "accepted":
      next.lastAccepted = { gesture: record.gesture, ts: record.ts };
      break;
    case "token":
      next.pendingToken = { kind: record.kind, text: record.text };
      break;
    case "parse_event": {
      const token = state.pendingToken ?? { kind: "?", text: "" };
      const entry: TraceEntry = {
        token,
        outcome: record.outcome,
        diagnostic: record.diagnostic,
        stateAfter: record.state_after,
      };
      next.trace = [...state.trace, entry].slice(-TRACE_LIMIT);
      next.pendingToken = null;
      break;
    }
    case "window_counts":
      next.window = {
        counts: record.counts,
        total: record.total,
        threshold: record.threshold,
      };
      break;
    case "effect":
      next.effects = [...state.effects, record.effect];
      break;
    case "error":
      next.errors = [...state.errors, record.error].slice(-50);
      break;
  }
  return next;
}

export function markClosed(state: ConsoleState): ConsoleState {
  return { ...state, connection: "closed" };
}

// Derived views used by the DOM layer; kept here so they are testable.

export function tileLabel(tile: Tile): string {
  if (tile.system) return tile.system;
  const parts: string[] = [];
  if (tile.fn) parts.push(tile.fn);
  if (tile.param) parts.push(tile.param);
  return parts.join("/");
}

export function windowFill(state: ConsoleState): {
  gesture: number | null;
  count: number;
  needed: number;
  fraction: number;
} {
  const entries = Object.entries(state.window.counts);
  let gesture: number | null = null;
  let count = 0;
  for (const [key, value] of entries) {
    if (value > count) {
      gesture = Number(key);
      count = value;
    }
  }
  const needed = state.window.threshold + 1;
  return {
    gesture,
    count,
    needed,
    fraction: needed > 0 ? Math.min(1, count / needed) : 0,
  };
}
