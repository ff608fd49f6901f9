// Wire protocol: newline-delimited JSON records over one duplex stream.
// Outbound (server -> console) records carry a gapless per-connection seq.

import { z } from "zod";

export const TileSchema = z.object({
  gesture: z.number().int(),
  system: z.string().nullable(),
  fn: z.string().nullable(),
  param: z.string().nullable(),
});
export type Tile = z.infer<typeof TileSchema>;

export const SnapshotSchema = z.object({
  seq: z.number().int(),
  x: z.number(),
  y: z.number(),
  depth: z.number(),
  heading: z.number(),
  clock: z.number(),
});
export type Snapshot = z.infer<typeof SnapshotSchema>;

export const EffectSchema = z.discriminatedUnion("kind", [
  z.object({
    kind: z.literal("defined_function"),
    slot: z.number().int(),
    body: z.array(z.string()),
  }),
  z.object({
    kind: z.literal("variable_set"),
    slot: z.number().int(),
    value: z.number(),
  }),
  z.object({ kind: z.literal("keymap_changed"), index: z.number().int() }),
  z.object({
    kind: z.literal("executed"),
    commands: z.array(z.array(z.union([z.string(), z.number()]))),
  }),
]);
export type Effect = z.infer<typeof EffectSchema>;

const base = { seq: z.number().int() };

export const ServerRecordSchema = z.discriminatedUnion("type", [
  z.object({ ...base, type: z.literal("hello"), version: z.number().int() }),
  z.object({
    ...base,
    type: z.literal("keymap_changed"),
    index: z.number().int(),
    tiles: z.array(TileSchema),
  }),
  z.object({
    ...base,
    type: z.literal("env"),
    functions: z.record(z.string(), z.array(z.string())),
    variables: z.record(z.string(), z.number()),
  }),
  z.object({
    ...base,
    type: z.literal("robot_state"),
    x: z.number(),
    y: z.number(),
    depth: z.number(),
    heading: z.number(),
    clock: z.number(),
    snapshots: z.array(SnapshotSchema),
  }),
  z.object({
    ...base,
    type: z.literal("accepted"),
    gesture: z.number().int(),
    ts: z.number().int(),
  }),
  z.object({ ...base, type: z.literal("token"), kind: z.string(), text: z.string() }),
  z.object({
    ...base,
    type: z.literal("parse_event"),
    state_before: z.string(),
    state_after: z.string(),
    outcome: z.enum(["consumed", "ignored", "form_completed", "parse_error"]),
    diagnostic: z.string().nullable(),
  }),
  z.object({
    ...base,
    type: z.literal("window_counts"),
    counts: z.record(z.string(), z.number().int()),
    total: z.number().int(),
    threshold: z.number().int(),
  }),
  z.object({ ...base, type: z.literal("effect"), effect: EffectSchema }),
  z.object({ ...base, type: z.literal("error"), error: z.string() }),
]);
export type ServerRecord = z.infer<typeof ServerRecordSchema>;

export type FrameRecord = { type: "frame"; ts: number; gesture: number };
export type ClientRecord =
  | FrameRecord
  | { type: "reset" }
  | { type: "load_session"; path: string };

export function parseServerLine(line: string): ServerRecord {
  return ServerRecordSchema.parse(JSON.parse(line));
}

export function encodeClientRecord(record: ClientRecord): string {
  return JSON.stringify(record);
}
