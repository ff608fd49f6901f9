// Transports carry newline-delimited records.  The TCP transport talks to
// `afeis serve` directly (node contexts: tests, the ws bridge); browsers use
// the WebSocket transport in main.ts via the bridge.

export interface Transport {
  send(line: string): void;
  onLine(handler: (line: string) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

/** Incremental newline splitter shared by every transport. */
export class LineSplitter {
  private buffer = "";

  constructor(private readonly emit: (line: string) => void) {}

  push(chunk: string): void {
    this.buffer += chunk;
    let index;
    while ((index = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, index).trim();
      this.buffer = this.buffer.slice(index + 1);
      if (line) this.emit(line);
    }
  }
}

export async function connectTcp(host: string, port: number): Promise<Transport> {
  const net = await import("node:net");
  const socket = net.createConnection({ host, port, noDelay: true });
  await new Promise<void>((resolve, reject) => {
    socket.once("connect", resolve);
    socket.once("error", reject);
  });
  socket.setEncoding("utf-8");

  let lineHandler: (line: string) => void = () => {};
  let closeHandler: () => void = () => {};
  const splitter = new LineSplitter((line) => lineHandler(line));
  socket.on("data", (chunk: string) => splitter.push(chunk));
  socket.on("close", () => closeHandler());
  socket.on("error", () => socket.destroy());

  return {
    send(line: string): void {
      socket.write(line + "\n");
    },
    onLine(handler) {
      lineHandler = handler;
    },
    onClose(handler) {
      closeHandler = handler;
    },
    close(): void {
      socket.end();
      socket.destroy();
    },
  };
}
