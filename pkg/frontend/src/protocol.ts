// Message types and (de)serialization for the teleoperation wire protocol.
// Field-by-field documentation lives in docs/protocol.md at the repo root;
// these types mirror it exactly. The console talks to the service only
// through this file.

export const PROTOCOL_VERSION = 1;

export type ServerKind = "hello" | "state" | "frame" | "ack" | "fault";
export type ClientKind = "hello" | "command";

export interface Envelope<P = unknown> {
  kind: string;
  seq: number;
  ts_ms: number;
  payload: P;
}

export interface HelloPayload {
  protocol: number;
  bracket_deg: [number, number];
  deploy_volume_ml: number;
  max_volume_ml: number;
  camera_rate_hz: number;
  state_rate_hz: number;
  frame_rate_hz: number;
  command_rate_hz: number;
  time_scale: number;
  seed: number;
  role: string;
  authority: boolean;
}

export interface StatePayload {
  tick: number;
  time_s: number;
  alpha_cmd_deg: number;
  alpha_est_deg: number | null;
  alpha_true_deg: number;
  ratio_target: number;
  ratio_measured: number | null;
  motor_rpm: number;
  volume_ml: number;
  face_diameter_mm: number;
  tool_inserted: boolean;
  fault: string;
  estop: boolean;
  authority: boolean;
}

export interface FramePayload {
  tick: number;
  time_ms: number;
  encoding: string;
  data: string; // base64 PNG
}

export interface AckPayload {
  command_seq: number;
  action: string;
  applied_value: number | null;
  clamped: boolean;
}

export interface FaultPayload {
  command_seq: number | null;
  code: string;
  detail: string;
  at_ms?: number;
}

export type CommandAction =
  | "set_angle"
  | "estop"
  | "reset"
  | "tool_insert"
  | "tool_remove";

export class ProtocolError extends Error {}

const SERVER_KINDS = new Set(["hello", "state", "frame", "ack", "fault"]);

/** Parse one incoming message; throws ProtocolError on anything malformed. */
export function parseEnvelope(text: string): Envelope {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("message is not valid JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ProtocolError("message is not an object");
  }
  const msg = raw as Record<string, unknown>;
  if (typeof msg.kind !== "string" || !SERVER_KINDS.has(msg.kind)) {
    throw new ProtocolError(`unknown message kind ${JSON.stringify(msg.kind)}`);
  }
  if (typeof msg.seq !== "number" || !Number.isInteger(msg.seq)) {
    throw new ProtocolError("seq must be an integer");
  }
  if (typeof msg.ts_ms !== "number") {
    throw new ProtocolError("ts_ms must be a number");
  }
  if (typeof msg.payload !== "object" || msg.payload === null) {
    throw new ProtocolError("payload must be an object");
  }
  return msg as unknown as Envelope;
}

export function makeHello(seq: number, tsMs: number, role: string): string {
  return JSON.stringify({ kind: "hello", seq, ts_ms: tsMs, payload: { role } });
}

export function makeCommand(
  seq: number,
  tsMs: number,
  action: CommandAction,
  value?: number,
): string {
  const payload: Record<string, unknown> = { action };
  if (value !== undefined) payload.value = value;
  return JSON.stringify({ kind: "command", seq, ts_ms: tsMs, payload });
}
