// Browser wiring: connect a ConsoleClient to a real WebSocket and bind the
// widgets. All control logic lives in client.ts; this file is glue.

import { ConsoleClient, WireSocket } from "./client.js";
import { StripChart } from "./charts.js";
import { FeedView } from "./feed.js";
import { Knob } from "./knob.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function defaultUrl(): string {
  if (location.protocol.startsWith("http") && location.host !== "") {
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    return `${scheme}://${location.host}/ws`;
  }
  return "ws://127.0.0.1:8765/ws";
}

function connect(url: string, attach: (socket: WireSocket) => ConsoleClient): void {
  const ws = new WebSocket(url);
  const client = attach({
    send: (data) => ws.send(data),
    close: () => ws.close(),
  });
  ws.onopen = () => client.handleOpen();
  ws.onmessage = (ev) => client.handleMessage(String(ev.data));
  ws.onclose = () => client.handleClose();
  ws.onerror = () => client.handleClose();
}

function main(): void {
  const statusEl = el<HTMLSpanElement>("status");
  const authorityEl = el<HTMLSpanElement>("authority");
  const bannerEl = el<HTMLDivElement>("banner");
  const logEl = el<HTMLDivElement>("log");
  const urlInput = el<HTMLInputElement>("url");
  const readouts = {
    angle: el<HTMLSpanElement>("readout-angle"),
    volume: el<HTMLSpanElement>("readout-volume"),
    face: el<HTMLSpanElement>("readout-face"),
    tool: el<HTMLSpanElement>("readout-tool"),
  };
  urlInput.value = defaultUrl();

  const feed = new FeedView(el<HTMLImageElement>("feed"), el<HTMLElement>("feed-placeholder"));
  const knob = new Knob(el<HTMLElement>("knob-dial"), el<HTMLElement>("knob-readout"));

  let client: ConsoleClient | null = null;
  let charts: StripChart[] = [];
  let dirty = false;

  function log(text: string): void {
    const line = document.createElement("div");
    line.textContent = `${new Date().toLocaleTimeString()} ${text}`;
    logEl.prepend(line);
    while (logEl.childElementCount > 40) logEl.lastElementChild?.remove();
  }

  let bannerTimer: ReturnType<typeof setTimeout> | null = null;
  function banner(text: string): void {
    bannerEl.textContent = text;
    bannerEl.style.display = "";
    if (bannerTimer !== null) clearTimeout(bannerTimer);
    bannerTimer = setTimeout(() => {
      bannerEl.style.display = "none";
    }, 4000);
  }

  function redrawLoop(): void {
    if (dirty) {
      dirty = false;
      for (const chart of charts) chart.draw();
    }
    requestAnimationFrame(redrawLoop);
  }
  requestAnimationFrame(redrawLoop);

  el<HTMLButtonElement>("connect").addEventListener("click", () => {
    client?.close();
    statusEl.textContent = "connecting";
    connect(urlInput.value, (socket) => {
      client = new ConsoleClient(socket);
      const b = client.state.buffers;
      charts = [
        new StripChart(el<HTMLCanvasElement>("chart-angle"), {
          title: "bend angle [deg]  commanded=amber estimated=cyan",
          yMin: 0, yMax: 105,
          series: [
            { buffer: b.commanded, color: "#e0a830" },
            { buffer: b.estimated, color: "#4fc3d9", smoothed: true },
          ],
        }),
        new StripChart(el<HTMLCanvasElement>("chart-ratio"), {
          title: "pixel ratio  target=amber measured=cyan",
          yMin: 0, yMax: 0.3,
          series: [
            { buffer: b.ratioTarget, color: "#e0a830" },
            { buffer: b.ratioMeasured, color: "#4fc3d9", smoothed: true },
          ],
        }),
        new StripChart(el<HTMLCanvasElement>("chart-rpm"), {
          title: "motor speed [rpm]",
          yMin: -110, yMax: 110,
          series: [{ buffer: b.motorRpm, color: "#9ad27d" }],
        }),
      ];
      client.onStatus = (s) => {
        statusEl.textContent = s;
        statusEl.className = s;
      };
      client.onHello = (h) => {
        log(`connected: protocol ${h.protocol}, bracket ${h.bracket_deg[0]}-${h.bracket_deg[1]} deg, `
          + `time scale ${h.time_scale}x`);
      };
      client.onState = (s) => {
        authorityEl.textContent = s.authority ? "authority: yes" : "authority: no";
        readouts.angle.textContent = s.alpha_est_deg === null
          ? "est --" : `est ${s.alpha_est_deg.toFixed(1)}°`;
        readouts.volume.textContent = `${s.volume_ml.toFixed(2)} mL`;
        readouts.face.textContent = `${s.face_diameter_mm.toFixed(1)} mm`;
        readouts.tool.textContent = s.tool_inserted ? "tool: in" : "tool: out";
        dirty = true;
      };
      client.onFrame = (f) => feed.update(f);
      client.onWarning = (text) => log(`warning: ${text}`);
      client.onFaultBanner = (code, detail) => banner(`${code}: ${detail}`);
      client.onResponse = (kind, payload) => {
        if (kind === "fault") {
          const p = payload as { code?: string; detail?: string };
          log(`command refused: ${p.code} (${p.detail})`);
        }
      };
      feed.onDecodeFailure = (detail) => banner(`camera feed: ${detail}`);
      return client;
    });
  });

  knob.onChange = (deg) => client?.sendKnob(deg);
  el<HTMLButtonElement>("inflate").addEventListener("click", () => {
    // Deploy the face even with the knob at rest; otherwise go to the knob.
    client?.sendKnob(Math.max(knob.valueDeg, 1));
  });
  el<HTMLButtonElement>("estop").addEventListener("click", () => client?.sendAction("estop"));
  el<HTMLButtonElement>("reset").addEventListener("click", () => client?.sendAction("reset"));
  el<HTMLButtonElement>("tool-insert").addEventListener(
    "click", () => client?.sendAction("tool_insert"));
  el<HTMLButtonElement>("tool-remove").addEventListener(
    "click", () => client?.sendAction("tool_remove"));
}

main();
