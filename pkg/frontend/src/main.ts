// Browser entry: connect through the WebSocket bridge, mount the console.
// The bridge (npm run bridge) relays each WebSocket message as one line of
// the TCP protocol and vice versa.

import { OperatorConsole } from "./console.js";
import type { Transport } from "./transport.js";
import { mountConsole } from "./view.js";

function connectWebSocket(url: string): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const socket = new WebSocket(url);
    let lineHandler: (line: string) => void = () => {};
    let closeHandler: () => void = () => {};
    socket.onopen = () =>
      resolve({
        send: (line) => socket.send(line),
        onLine: (handler) => {
          lineHandler = handler;
        },
        onClose: (handler) => {
          closeHandler = handler;
        },
        close: () => socket.close(),
      });
    socket.onerror = () => reject(new Error(`cannot reach ${url}`));
    socket.onmessage = (event) => {
      for (const line of String(event.data).split("\n")) {
        if (line.trim()) lineHandler(line.trim());
      }
    };
    socket.onclose = () => closeHandler();
  });
}

async function boot(): Promise<void> {
  const root = document.getElementById("app")!;
  const params = new URLSearchParams(location.search);
  const url = params.get("bridge") ?? "ws://127.0.0.1:8765";
  try {
    const transport = await connectWebSocket(url);
    const console_ = new OperatorConsole(transport, {}, Date.now() & 0xffff);
    mountConsole(root, console_);
  } catch (error) {
    root.innerHTML = `<p class="error">${String(error)}.<br>
      Start the pipeline with <code>afeis serve --config demo/session.json</code>
      and the relay with <code>npm run bridge</code>, then reload.</p>`;
  }
}

void boot();
