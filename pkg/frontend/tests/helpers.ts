// Fake transport and clock for driving ConsoleClient deterministically,
// plus builders for well-formed server messages.

import { Timers, WireSocket } from "../src/client.js";

export class FakeSocket implements WireSocket {
  sent: string[] = [];
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
  }

  sentJson(): Array<{ kind: string; seq: number; ts_ms: number; payload: Record<string, unknown> }> {
    return this.sent.map((s) => JSON.parse(s));
  }

  sentCommands(): Array<{ seq: number; action: string; value?: number }> {
    return this.sentJson()
      .filter((m) => m.kind === "command")
      .map((m) => ({ seq: m.seq, ...(m.payload as { action: string; value?: number }) }));
  }
}

interface Scheduled {
  id: number;
  at: number;
  fn: () => void;
}

export class FakeTimers implements Timers {
  private t = 0;
  private queue: Scheduled[] = [];
  private nextId = 1;

  now(): number {
    return this.t;
  }

  setTimeout(fn: () => void, ms: number): unknown {
    const id = this.nextId++;
    this.queue.push({ id, at: this.t + ms, fn });
    return id;
  }

  clearTimeout(handle: unknown): void {
    this.queue = this.queue.filter((e) => e.id !== handle);
  }

  advance(ms: number): void {
    const target = this.t + ms;
    for (;;) {
      const due = this.queue.filter((e) => e.at <= target).sort((a, b) => a.at - b.at)[0];
      if (due === undefined) break;
      this.queue = this.queue.filter((e) => e.id !== due.id);
      this.t = due.at;
      due.fn();
    }
    this.t = target;
  }
}

let serverSeq = 0;

export function resetServerSeq(): void {
  serverSeq = 0;
}

function envelope(kind: string, payload: Record<string, unknown>, seq?: number): string {
  const s = seq ?? ++serverSeq;
  if (seq !== undefined) serverSeq = Math.max(serverSeq, seq);
  return JSON.stringify({ kind, seq: s, ts_ms: 0, payload });
}

export function helloMsg(overrides: Record<string, unknown> = {}, seq?: number): string {
  return envelope("hello", {
    protocol: 1,
    bracket_deg: [0, 100],
    deploy_volume_ml: 0.8,
    max_volume_ml: 4,
    camera_rate_hz: 30,
    state_rate_hz: 15,
    frame_rate_hz: 10,
    command_rate_hz: 50,
    time_scale: 1,
    seed: 0,
    role: "operator",
    authority: true,
    ...overrides,
  }, seq);
}

export function stateMsg(
  tick: number, overrides: Record<string, unknown> = {}, seq?: number,
): string {
  return envelope("state", {
    tick,
    time_s: tick / 30,
    alpha_cmd_deg: 0,
    alpha_est_deg: 0.1,
    alpha_true_deg: 0.1,
    ratio_target: 0.03,
    ratio_measured: 0.031,
    motor_rpm: 0,
    volume_ml: 0,
    face_diameter_mm: 4.6,
    tool_inserted: false,
    fault: "",
    estop: false,
    authority: true,
    ...overrides,
  }, seq);
}

export function frameMsg(tick: number, data = "aGVsbG8=", seq?: number): string {
  return envelope("frame", { tick, time_ms: tick * 34, encoding: "png", data }, seq);
}

export function ackMsg(
  commandSeq: number, action: string, value: number | null, clamped = false, seq?: number,
): string {
  return envelope("ack", {
    command_seq: commandSeq, action, applied_value: value, clamped,
  }, seq);
}

export function faultMsg(
  commandSeq: number | null, code: string, detail = "", seq?: number,
): string {
  return envelope("fault", { command_seq: commandSeq, code, detail }, seq);
}
