// Wire protocol types for the ground-control service (JSON over WebSocket).
// Shapes mirror the server schemas documented in the repository README.

export type TelemetryKind = 'SAMPLE' | 'ALERT' | 'STATE' | 'LATENCY' | 'MISSION_END' | 'GAP';

export type LevelColor = 'green' | 'yellow' | 'red' | 'red_escalated' | 'no_detections';

export interface HerdIndividual {
  id: string;
  bbox: [number, number, number, number];
  behavior: string;
  detection_confidence: number;
  behavior_confidence: number;
}

export interface SamplePayload {
  frame_index: number;
  timestamp_ms: number;
  score: number | null;
  level: LevelColor;
  n_included: number;
  n_adverse: number;
  n_detected_raw: number;
  centroid: [number, number] | null;
  degraded: boolean;
  theta_s: number;
  individuals: HerdIndividual[];
}

export interface AlertPayload {
  kind: string; // enter_green | enter_yellow | enter_red | escalate | no_detections | model_degraded
  timestamp_ms: number;
  score: number | null;
  audio: boolean;
  flashing: boolean;
}

export interface StatePayload {
  mission_id: string;
  status: string;
  theta_s: number;
  speed: number | null;
  drone_state: string;
  navigation_mode: string;
  battery_pct: number;
  model_confidence: number | null;
  frame_index: number | null;
  score: number | null;
  level: LevelColor;
  degraded: boolean;
  herd_size: number;
  species: string;
  snapshot: boolean;
}

export interface LatencyPayload {
  frame_index: number;
  score_ms: number;
  alert_ms: number;
  total_ms: number;
}

export interface GapPayload {
  dropped_from: number;
  dropped_to: number;
}

export interface MissionEndPayload {
  status: string;
  frames_processed: number | null;
}

export interface TelemetryMessage {
  kind: TelemetryKind;
  seq: number;
  payload:
    | SamplePayload
    | AlertPayload
    | StatePayload
    | LatencyPayload
    | GapPayload
    | MissionEndPayload;
}

export type CommandKind =
  | 'SET_THRESHOLD'
  | 'PAUSE'
  | 'RETREAT'
  | 'RESUME'
  | 'START_REPLAY'
  | 'SET_SPEED'
  | 'STOP';

export interface OperatorCommand {
  kind: CommandKind;
  theta_s?: number;
  speed?: number | 'afap';
}

export interface CommandReply {
  kind: 'ACK' | 'REJECTED';
  command: CommandKind | null;
  reason?: string;
  applied_seq?: number | null;
  theta_s?: number;
  drone_state?: string;
  speed?: number | null;
}

const TELEMETRY_KINDS: ReadonlySet<string> = new Set([
  'SAMPLE',
  'ALERT',
  'STATE',
  'LATENCY',
  'MISSION_END',
  'GAP',
]);

function isObject(value: unknown): value is Record<string, unknown> {
  return typeof value === 'object' && value !== null && !Array.isArray(value);
}

/**
 * Parse one telemetry frame. Returns null for anything malformed; the caller
 * logs and leaves the view unchanged.
 */
export function parseTelemetry(raw: unknown): TelemetryMessage | null {
  let data: unknown = raw;
  if (typeof raw === 'string') {
    try {
      data = JSON.parse(raw);
    } catch {
      return null;
    }
  }
  if (!isObject(data)) return null;
  const kind = data['kind'];
  const seq = data['seq'];
  const payload = data['payload'];
  if (typeof kind !== 'string' || !TELEMETRY_KINDS.has(kind)) return null;
  if (typeof seq !== 'number' || !Number.isFinite(seq)) return null;
  if (!isObject(payload)) return null;
  if (kind === 'SAMPLE') {
    if (typeof payload['frame_index'] !== 'number') return null;
    if (typeof payload['level'] !== 'string') return null;
    if (!Array.isArray(payload['individuals'])) return null;
  }
  if (kind === 'ALERT' && typeof payload['kind'] !== 'string') return null;
  if (kind === 'STATE' && typeof payload['theta_s'] !== 'number') return null;
  return { kind: kind as TelemetryKind, seq, payload } as unknown as TelemetryMessage;
}

export function parseCommandReply(raw: unknown): CommandReply | null {
  let data: unknown = raw;
  if (typeof raw === 'string') {
    try {
      data = JSON.parse(raw);
    } catch {
      return null;
    }
  }
  if (!isObject(data)) return null;
  const kind = data['kind'];
  if (kind !== 'ACK' && kind !== 'REJECTED') return null;
  return data as unknown as CommandReply;
}
