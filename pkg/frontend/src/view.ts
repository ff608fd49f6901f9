// DOM layer: renders ConsoleState, forwards clicks to the controller.
// Presentation only; all behavior lives in the controller and reducer.

import type { OperatorConsole } from "./console.js";
import type { ConsoleState } from "./state.js";
import { tileLabel, windowFill } from "./state.js";

export function mountConsole(root: HTMLElement, console_: OperatorConsole): void {
  root.innerHTML = `
    <header>
      <span id="conn" class="badge">connecting</span>
      <label><input type="checkbox" id="noise"> noise</label>
      <button id="reset">reset session</button>
      <span id="gap" class="badge warn" hidden>sequence gap!</span>
    </header>
    <main>
      <section id="left">
        <h2>keymap <span id="keymap-index"></span></h2>
        <div id="tiles" class="tiles"></div>
        <h2>confirm window</h2>
        <div class="meter"><div id="meter-fill"></div></div>
        <div id="meter-text" class="mono"></div>
      </section>
      <section id="middle">
        <h2>parse trace</h2>
        <ol id="trace" class="mono"></ol>
        <h2>errors</h2>
        <ul id="errors" class="mono"></ul>
      </section>
      <section id="right">
        <h2>vehicle</h2>
        <canvas id="map" width="320" height="320"></canvas>
        <div class="gauges">
          <div>
            <div class="gauge"><div id="depth-fill"></div></div>
            <div id="depth-text" class="mono"></div>
          </div>
          <div id="robot-text" class="mono"></div>
        </div>
        <h2>functions &amp; variables</h2>
        <div id="env" class="mono"></div>
      </section>
    </main>`;

  const el = (id: string) => root.querySelector<HTMLElement>(`#${id}`)!;
  el("reset").addEventListener("click", () => console_.reset());
  const noiseBox = root.querySelector<HTMLInputElement>("#noise")!;
  noiseBox.addEventListener("change", () => console_.setNoise(noiseBox.checked));

  const tiles = el("tiles");
  tiles.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("[data-gesture]");
    if (target) console_.pressTile(Number(target.getAttribute("data-gesture")));
  });

  console_.onChange((state) => draw(root, state));
  draw(root, console_.state);
}

function esc(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function draw(root: HTMLElement, state: ConsoleState): void {
  const el = (id: string) => root.querySelector<HTMLElement>(`#${id}`)!;

  const conn = el("conn");
  conn.textContent = state.connection;
  conn.className = `badge ${state.connection}`;
  el("gap").hidden = !state.seqGap;

  el("keymap-index").textContent = state.keymap ? `#${state.keymap.index}` : "";
  const tiles = el("tiles");
  if (state.keymap) {
    tiles.innerHTML = state.keymap.tiles
      .map((tile) => {
        const label = tileLabel(tile);
        const classes = ["tile"];
        if (!label) classes.push("empty");
        if (tile.system) classes.push("system");
        if (state.lastAccepted?.gesture === tile.gesture) classes.push("hot");
        return `<button class="${classes.join(" ")}" data-gesture="${tile.gesture}"
                  title="gesture ${tile.gesture}">${esc(label) || "·"}</button>`;
      })
      .join("");
  }

  const fill = windowFill(state);
  el("meter-fill").style.width = `${Math.round(fill.fraction * 100)}%`;
  el("meter-text").textContent =
    fill.gesture === null
      ? "window empty"
      : `gesture ${fill.gesture}: ${fill.count}/${fill.needed} frames`;

  el("trace").innerHTML = state.trace
    .slice(-30)
    .map((entry) => {
      const token = entry.token.text
        ? `${entry.token.kind}(${entry.token.text})`
        : entry.token.kind;
      const note = entry.diagnostic ? ` — ${entry.diagnostic}` : "";
      return `<li class="${entry.outcome}">${esc(token)} → ${entry.outcome}${esc(note)}</li>`;
    })
    .join("");
  el("errors").innerHTML = state.errors.slice(-8).map((e) => `<li>${esc(e)}</li>`).join("");

  if (state.robot) {
    drawMap(root.querySelector<HTMLCanvasElement>("#map")!, state);
    const depth = state.robot.depth;
    el("depth-fill").style.height = `${Math.min(100, depth * 10)}%`;
    el("depth-text").textContent = `depth ${depth.toFixed(1)} m · ${
      state.robot.snapshots.length
    } snapshots`;
    el("robot-text").textContent =
      `x ${state.robot.x.toFixed(1)}  y ${state.robot.y.toFixed(1)}  ` +
      `heading ${state.robot.heading.toFixed(0)}°  clock ${state.robot.clock.toFixed(1)} s`;
  }

  const env = el("env");
  const functions = Object.entries(state.env.functions)
    .map(
      ([slot, body]) =>
        `<div class="fn"><b>function ${slot}</b><pre>${esc(body.join("\n"))}</pre></div>`,
    )
    .join("");
  const variables = Object.entries(state.env.variables)
    .map(([slot, value]) => `<div>var ${esc(slot)} = ${value}</div>`)
    .join("");
  env.innerHTML = functions + variables || "<i>nothing defined</i>";
}

function drawMap(canvas: HTMLCanvasElement, state: ConsoleState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || !state.robot) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const scale = 15; // px per meter
  const cx = width / 2;
  const cy = height / 2;
  const toPx = (x: number, y: number) => [cx + x * scale, cy - y * scale] as const;

  ctx.strokeStyle = "#ccd";
  ctx.beginPath();
  ctx.moveTo(cx, 0);
  ctx.lineTo(cx, height);
  ctx.moveTo(0, cy);
  ctx.lineTo(width, cy);
  ctx.stroke();

  ctx.fillStyle = "#d66";
  for (const snap of state.robot.snapshots) {
    const [sx, sy] = toPx(snap.x, snap.y);
    ctx.beginPath();
    ctx.arc(sx, sy, 3, 0, Math.PI * 2);
    ctx.fill();
  }

  const [rx, ry] = toPx(state.robot.x, state.robot.y);
  const angle = (state.robot.heading * Math.PI) / 180;
  ctx.fillStyle = "#246";
  ctx.beginPath();
  ctx.arc(rx, ry, 6, 0, Math.PI * 2);
  ctx.fill();
  ctx.strokeStyle = "#246";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(rx, ry);
  ctx.lineTo(rx + 14 * Math.cos(angle), ry - 14 * Math.sin(angle));
  ctx.stroke();
}
