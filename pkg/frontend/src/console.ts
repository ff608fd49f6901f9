// The operator console controller: owns the state fold, the keypad, and the
// transport.  The view layer subscribes to state changes and renders; it
// never computes semantics of its own.

import { Keypad, type KeypadProfile } from "./keypad.js";
import {
  encodeClientRecord,
  parseServerLine,
  type ServerRecord,
} from "./protocol.js";
import {
  initialState,
  markClosed,
  render,
  type ConsoleState,
} from "./state.js";
import type { Transport } from "./transport.js";

export type StateListener = (state: ConsoleState, record: ServerRecord | null) => void;

export class OperatorConsole {
  state: ConsoleState = initialState();
  readonly keypad: Keypad;
  private listeners: StateListener[] = [];

  constructor(
    private readonly transport: Transport,
    keypadProfile: Partial<KeypadProfile> = {},
    seed = 1,
  ) {
    this.keypad = new Keypad(keypadProfile, seed);
    transport.onLine((line) => {
      let record: ServerRecord;
      try {
        record = parseServerLine(line);
      } catch (error) {
        this.state = {
          ...this.state,
          errors: [...this.state.errors, `unreadable record: ${String(error)}`],
        };
        this.notify(null);
        return;
      }
      this.state = render(this.state, record);
      this.notify(record);
    });
    transport.onClose(() => {
      this.state = markClosed(this.state);
      this.notify(null);
    });
  }

  /** Subscribe to state changes; returns an unsubscribe function. */
  onChange(listener: StateListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(record: ServerRecord | null): void {
    for (const listener of [...this.listeners]) listener(this.state, record);
  }

  /** Press one gesture tile: emit its frame burst (plus noise, if enabled). */
  pressTile(gesture: number): void {
    for (const frame of this.keypad.press(gesture)) {
      this.transport.send(encodeClientRecord(frame));
    }
  }

  setNoise(on: boolean): void {
    this.keypad.setNoise(on);
  }

  reset(): void {
    this.transport.send(encodeClientRecord({ type: "reset" }));
  }

  loadSession(path: string): void {
    this.transport.send(encodeClientRecord({ type: "load_session", path }));
  }

  close(): void {
    this.transport.close();
  }

  /** Resolve when a predicate over the state holds (test and script helper). */
  waitFor(predicate: (state: ConsoleState) => boolean, timeoutMs = 10_000): Promise<ConsoleState> {
    if (predicate(this.state)) return Promise.resolve(this.state);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        unsubscribe();
        reject(new Error(`timed out waiting for console state (${timeoutMs} ms)`));
      }, timeoutMs);
      const unsubscribe = this.onChange((state) => {
        if (predicate(state)) {
          clearTimeout(timer);
          unsubscribe();
          resolve(state);
        }
      });
    });
  }
}
