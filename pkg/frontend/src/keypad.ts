// Virtual keypad: a tile press becomes a timed burst of classifier frames,
// exactly what a camera pipeline would deliver.  Timestamps are synthetic
// and carried in the frames, so the server never depends on wall-clock
// pacing.  With noise enabled, a held transient shape is appended after the
// burst, imitating the in-between hand poses a real camera catches.

import type { FrameRecord } from "./protocol.js";

export interface KeypadProfile {
  holdFrames: number;
  framePeriodMs: number;
  releaseGapMs: number;
  noise: boolean;
  transientPool: number[];
  transitionRange: [number, number];
}

export const DEFAULT_PROFILE: KeypadProfile = {
  holdFrames: 12,
  framePeriodMs: 50,
  releaseGapMs: 1500,
  noise: false,
  transientPool: Array.from({ length: 25 }, (_, i) => 25 + i),
  transitionRange: [2, 14],
};

// Small deterministic generator so tests can pin streams.
export function makeRng(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

export class Keypad {
  profile: KeypadProfile;
  private clockMs: number;
  private rng: () => number;

  constructor(profile: Partial<KeypadProfile> = {}, seed = 1, startMs = 0) {
    this.profile = { ...DEFAULT_PROFILE, ...profile };
    this.clockMs = startMs;
    this.rng = makeRng(seed);
  }

  get now(): number {
    return this.clockMs;
  }

  setNoise(on: boolean): void {
    this.profile = { ...this.profile, noise: on };
  }

  /** Frames for one tile press; advances the synthetic clock. */
  press(gesture: number): FrameRecord[] {
    const { holdFrames, framePeriodMs, releaseGapMs, noise } = this.profile;
    const frames: FrameRecord[] = [];
    for (let i = 0; i < holdFrames; i++) {
      frames.push({ type: "frame", ts: this.clockMs, gesture });
      this.clockMs += framePeriodMs;
    }
    if (noise) {
      const [lo, hi] = this.profile.transitionRange;
      const span = Math.floor(this.rng() * (hi - lo + 1)) + lo;
      const pool = this.profile.transientPool;
      const shape = pool[Math.floor(this.rng() * pool.length)] ?? gesture;
      for (let i = 0; i < span; i++) {
        frames.push({ type: "frame", ts: this.clockMs, gesture: shape });
        this.clockMs += framePeriodMs;
      }
    }
    // release: enough silence for the window to drain, so the next press of
    // the same tile registers as a new input
    this.clockMs += releaseGapMs;
    return frames;
  }
}
