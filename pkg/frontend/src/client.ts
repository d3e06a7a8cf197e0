// Transport-agnostic console session: handshake, command sending with
// client-side clamping and debounce, telemetry ingestion into bounded chart
// buffers, frame ordering, and ack/fault bookkeeping. The DOM never touches
// the wire except through this class, and this class never touches the DOM,
// so the whole control surface is testable with a fake socket and clock.

import {
  AckPayload,
  CommandAction,
  Envelope,
  FaultPayload,
  FramePayload,
  HelloPayload,
  makeCommand,
  makeHello,
  parseEnvelope,
  ProtocolError,
  StatePayload,
} from "./protocol.js";
import { RingBuffer } from "./ringbuffer.js";

export interface WireSocket {
  send(data: string): void;
  close(): void;
}

export interface Timers {
  now(): number; // milliseconds, any monotonic-enough origin
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
}

const realTimers: Timers = {
  now: () => Date.now(),
  setTimeout: (fn, ms) => setTimeout(fn, ms),
  clearTimeout: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
};

export type ConnectionStatus = "connecting" | "connected" | "closed";

export interface ChartPoint {
  t: number; // simulated seconds
  v: number; // NaN for gaps (channel lost)
}

export interface ChartBuffers {
  commanded: RingBuffer<ChartPoint>;
  estimated: RingBuffer<ChartPoint>;
  ratioTarget: RingBuffer<ChartPoint>;
  ratioMeasured: RingBuffer<ChartPoint>;
  motorRpm: RingBuffer<ChartPoint>;
}

export interface ConsoleState {
  status: ConnectionStatus;
  knobDeg: number;
  latest: StatePayload | null;
  hello: HelloPayload | null;
  authority: boolean;
  buffers: ChartBuffers;
}

export interface ClientStats {
  commandsSent: number;
  acks: number;
  commandFaults: number;
  staleFramesDropped: number;
  protocolViolations: number;
}

export interface ClientOptions {
  role?: string;
  chartCapacity?: number;
  timers?: Timers;
}

const KNOB_MIN_DEG = 0;
const KNOB_MAX_DEG = 100;

export class ConsoleClient {
  readonly state: ConsoleState;
  readonly stats: ClientStats = {
    commandsSent: 0,
    acks: 0,
    commandFaults: 0,
    staleFramesDropped: 0,
    protocolViolations: 0,
  };

  onStatus: (status: ConnectionStatus) => void = () => {};
  onHello: (hello: HelloPayload) => void = () => {};
  onState: (state: StatePayload) => void = () => {};
  onFrame: (frame: FramePayload) => void = () => {};
  onResponse: (kind: "ack" | "fault", payload: AckPayload | FaultPayload) => void = () => {};
  onWarning: (text: string) => void = () => {};
  onFaultBanner: (code: string, detail: string) => void = () => {};

  private readonly role: string;
  private readonly timers: Timers;
  private clientSeq = 0;
  private lastServerSeq = 0;
  private lastFrameTick = -1;
  private pending = new Map<number, { action: CommandAction; answered: boolean }>();
  private debounceMs = 20; // refined from the hello's command_rate_hz
  private lastSendWall = -Infinity;
  private trailingTimer: unknown = null;
  private trailingValue: number | null = null;

  constructor(private readonly socket: WireSocket, options: ClientOptions = {}) {
    this.role = options.role ?? "operator";
    this.timers = options.timers ?? realTimers;
    const capacity = options.chartCapacity ?? 600;
    this.state = {
      status: "connecting",
      knobDeg: 0,
      latest: null,
      hello: null,
      authority: false,
      buffers: {
        commanded: new RingBuffer(capacity),
        estimated: new RingBuffer(capacity),
        ratioTarget: new RingBuffer(capacity),
        ratioMeasured: new RingBuffer(capacity),
        motorRpm: new RingBuffer(capacity),
      },
    };
  }

  // -- transport adapter entry points --

  handleOpen(): void {
    this.clientSeq += 1;
    this.socket.send(makeHello(this.clientSeq, Math.round(this.timers.now()), this.role));
  }

  handleClose(): void {
    this.setStatus("closed");
    if (this.trailingTimer !== null) {
      this.timers.clearTimeout(this.trailingTimer);
      this.trailingTimer = null;
      this.trailingValue = null;
    }
  }

  handleMessage(text: string): void {
    let envelope: Envelope;
    try {
      envelope = parseEnvelope(text);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.stats.protocolViolations += 1;
        this.onWarning(`unreadable message from server: ${err.message}`);
        return;
      }
      throw err;
    }
    if (envelope.seq <= this.lastServerSeq) {
      this.stats.protocolViolations += 1;
      this.onWarning(`server seq went backwards (${envelope.seq} after ${this.lastServerSeq})`);
      return;
    }
    this.lastServerSeq = envelope.seq;
    switch (envelope.kind) {
      case "hello":
        this.acceptHello(envelope.payload as HelloPayload);
        break;
      case "state":
        this.acceptState(envelope.payload as StatePayload);
        break;
      case "frame":
        this.acceptFrame(envelope.payload as FramePayload);
        break;
      case "ack":
        this.acceptResponse("ack", envelope.payload as AckPayload);
        break;
      case "fault":
        this.acceptResponse("fault", envelope.payload as FaultPayload);
        break;
    }
  }

  // -- operator-facing surface --

  /**
   * Steer to a knob value. Clamped client-side to 0-100 degrees and
   * debounced so a rapid wiggle emits at most one command per debounce
   * interval, always ending on the latest value.
   */
  sendKnob(valueDeg: number): void {
    const clamped = Math.min(KNOB_MAX_DEG, Math.max(KNOB_MIN_DEG, valueDeg));
    this.state.knobDeg = clamped;
    if (!this.canCommand("set_angle")) return;
    const now = this.timers.now();
    const since = now - this.lastSendWall;
    if (since >= this.debounceMs && this.trailingTimer === null) {
      this.emitCommand("set_angle", clamped);
      return;
    }
    this.trailingValue = clamped;
    if (this.trailingTimer === null) {
      const wait = Math.max(0, this.debounceMs - since);
      this.trailingTimer = this.timers.setTimeout(() => {
        this.trailingTimer = null;
        const value = this.trailingValue;
        this.trailingValue = null;
        if (value !== null && this.state.status === "connected") {
          this.emitCommand("set_angle", value);
        }
      }, wait);
    }
  }

  /** Buttons: estop, reset, tool_insert, tool_remove. Never debounced. */
  sendAction(action: Exclude<CommandAction, "set_angle">): void {
    if (!this.canCommand(action)) return;
    this.emitCommand(action);
  }

  close(): void {
    this.socket.close();
  }

  /** Commands still waiting for their ack or fault. */
  unansweredCommands(): number {
    let open = 0;
    for (const entry of this.pending.values()) if (!entry.answered) open += 1;
    return open;
  }

  // -- internals --

  private canCommand(action: CommandAction): boolean {
    if (this.state.status !== "connected") {
      this.onWarning(`not connected; ${action} not sent`);
      return false;
    }
    if (action !== "estop" && !this.state.authority) {
      this.onWarning(`no command authority; ${action} not sent`);
      return false;
    }
    return true;
  }

  private emitCommand(action: CommandAction, value?: number): void {
    this.clientSeq += 1;
    this.pending.set(this.clientSeq, { action, answered: false });
    this.stats.commandsSent += 1;
    this.lastSendWall = this.timers.now();
    this.socket.send(makeCommand(this.clientSeq, Math.round(this.lastSendWall), action, value));
  }

  private setStatus(status: ConnectionStatus): void {
    if (this.state.status !== status) {
      this.state.status = status;
      this.onStatus(status);
    }
  }

  private acceptHello(hello: HelloPayload): void {
    this.state.hello = Object.freeze(hello);
    this.state.authority = hello.authority;
    if (hello.command_rate_hz > 0) {
      this.debounceMs = 1000 / hello.command_rate_hz;
    }
    this.setStatus("connected");
    this.onHello(hello);
  }

  private acceptState(record: StatePayload): void {
    Object.freeze(record); // telemetry is read-only downstream
    this.state.latest = record;
    this.state.authority = record.authority;
    const t = record.time_s;
    const b = this.state.buffers;
    b.commanded.push({ t, v: record.alpha_cmd_deg });
    b.estimated.push({ t, v: record.alpha_est_deg ?? NaN });
    b.ratioTarget.push({ t, v: record.ratio_target });
    b.ratioMeasured.push({ t, v: record.ratio_measured ?? NaN });
    b.motorRpm.push({ t, v: record.motor_rpm });
    if (record.fault) this.onFaultBanner(record.fault, `loop fault at t=${t.toFixed(2)} s`);
    this.onState(record);
  }

  private acceptFrame(frame: FramePayload): void {
    if (frame.tick <= this.lastFrameTick) {
      this.stats.staleFramesDropped += 1;
      return;
    }
    this.lastFrameTick = frame.tick;
    this.onFrame(frame);
  }

  private acceptResponse(kind: "ack" | "fault", payload: AckPayload | FaultPayload): void {
    const seq = payload.command_seq;
    if (seq === null || seq === undefined) {
      const fault = payload as FaultPayload;
      this.onFaultBanner(fault.code, fault.detail);
      return;
    }
    const entry = this.pending.get(seq);
    if (entry === undefined || entry.answered) {
      this.stats.protocolViolations += 1;
      this.onWarning(`response for unknown or already-answered command ${seq}`);
      return;
    }
    entry.answered = true;
    if (kind === "ack") this.stats.acks += 1;
    else this.stats.commandFaults += 1;
    this.onResponse(kind, payload);
  }
}
