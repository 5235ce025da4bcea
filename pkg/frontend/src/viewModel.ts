// Pure view-model reducer. The view is a function of the last STATE snapshot
// plus every telemetry message after it: replaying the same log always
// reproduces the identical view. No scoring happens here; every score and
// level comes from the server.

import type {
  AlertPayload,
  GapPayload,
  HerdIndividual,
  LatencyPayload,
  MissionEndPayload,
  SamplePayload,
  StatePayload,
  TelemetryMessage,
} from './protocol.js';

export type Banner = 'none' | 'yellow' | 'red' | 'red_flashing' | 'degraded';

export type Effect = { kind: 'chime'; seq: number } | { kind: 'flash'; seq: number };

export interface SystemPanel {
  missionId: string;
  status: string;
  navigationMode: string;
  batteryPct: number | null;
  modelConfidence: number | null;
  droneState: string;
  speed: number | null;
  herdSize: number | null;
  species: string;
}

export interface DashboardViewModel {
  lastSeq: number;
  score: number | null;
  level: string;
  thetaS: number;
  degraded: boolean;
  frameIndex: number | null;
  herd: HerdIndividual[];
  centroid: [number, number] | null;
  banner: Banner;
  operatorResponding: boolean;
  panel: SystemPanel;
  latencyMs: number | null;
  gap: { from: number; to: number } | null;
  missionEnded: boolean;
}

export function initialViewModel(): DashboardViewModel {
  return {
    lastSeq: 0,
    score: null,
    level: 'no_detections',
    thetaS: 0.3,
    degraded: false,
    frameIndex: null,
    herd: [],
    centroid: null,
    banner: 'none',
    operatorResponding: false,
    panel: {
      missionId: '',
      status: 'disconnected',
      navigationMode: '-',
      batteryPct: null,
      modelConfidence: null,
      droneState: 'tracking',
      speed: null,
      herdSize: null,
      species: '',
    },
    latencyMs: null,
    gap: null,
    missionEnded: false,
  };
}

function bannerForLevel(level: string, current: Banner): Banner {
  switch (level) {
    case 'green':
      return 'none';
    case 'yellow':
      return 'yellow';
    case 'red':
      // an escalated banner stays flashing while the level remains red-family
      return current === 'red_flashing' ? 'red_flashing' : 'red';
    case 'red_escalated':
      return 'red_flashing';
    case 'no_detections':
      return 'degraded';
    default:
      return current;
  }
}

/** Vigilance bar geometry: fill fraction and band color for a score. */
export function barFill(score: number | null): number {
  if (score === null) return 0;
  return Math.max(0, Math.min(1, score));
}

export interface ReduceResult {
  view: DashboardViewModel;
  effects: Effect[];
}

/**
 * Apply one telemetry message. Pure: same (view, message) in, same
 * (view, effects) out. Malformed input never reaches this function.
 */
export function reduceTelemetry(
  view: DashboardViewModel,
  message: TelemetryMessage,
): ReduceResult {
  const effects: Effect[] = [];
  const next: DashboardViewModel = {
    ...view,
    panel: { ...view.panel },
    lastSeq: message.seq,
  };

  switch (message.kind) {
    case 'SAMPLE': {
      const p = message.payload as SamplePayload;
      next.score = p.score;
      next.level = p.level;
      next.thetaS = p.theta_s;
      next.degraded = p.degraded;
      next.frameIndex = p.frame_index;
      next.herd = p.individuals;
      next.centroid = p.centroid;
      next.banner = bannerForLevel(p.level, view.banner);
      break;
    }
    case 'ALERT': {
      const p = message.payload as AlertPayload;
      if (p.kind === 'enter_red') {
        next.banner = 'red';
        next.operatorResponding = false;
        if (p.audio) effects.push({ kind: 'chime', seq: message.seq });
      } else if (p.kind === 'escalate') {
        next.banner = 'red_flashing';
        if (p.flashing) effects.push({ kind: 'flash', seq: message.seq });
      } else if (p.kind === 'enter_yellow') {
        next.banner = 'yellow';
      } else if (p.kind === 'enter_green') {
        next.banner = 'none';
        next.operatorResponding = false;
      } else if (p.kind === 'model_degraded' || p.kind === 'no_detections') {
        next.banner = view.banner === 'red' || view.banner === 'red_flashing'
          ? view.banner // a lost model must not clear an active warning
          : 'degraded';
        next.degraded = true;
      }
      break;
    }
    case 'STATE': {
      const p = message.payload as StatePayload;
      next.panel = {
        missionId: p.mission_id,
        status: p.status,
        navigationMode: p.navigation_mode,
        batteryPct: p.battery_pct,
        modelConfidence: p.model_confidence,
        droneState: p.drone_state,
        speed: p.speed,
        herdSize: p.herd_size,
        species: p.species,
      };
      next.thetaS = p.theta_s;
      if (p.snapshot) {
        next.score = p.score;
        next.level = p.level;
        next.degraded = p.degraded;
        next.frameIndex = p.frame_index;
        next.banner = bannerForLevel(p.level, view.banner);
      }
      if (p.drone_state === 'pause' || p.drone_state === 'retreat') {
        next.operatorResponding = true;
      } else if (p.drone_state === 'tracking') {
        next.operatorResponding = false;
      }
      break;
    }
    case 'LATENCY': {
      const p = message.payload as LatencyPayload;
      next.latencyMs = p.total_ms;
      break;
    }
    case 'GAP': {
      const p = message.payload as GapPayload;
      next.gap = { from: p.dropped_from, to: p.dropped_to };
      break;
    }
    case 'MISSION_END': {
      const p = message.payload as MissionEndPayload;
      next.missionEnded = true;
      next.panel.status = p.status;
      break;
    }
  }
  return { view: next, effects };
}

/** Fold a whole telemetry log from a fresh view; used on (re)connect. */
export function replayLog(messages: TelemetryMessage[]): ReduceResult {
  let view = initialViewModel();
  const effects: Effect[] = [];
  for (const message of messages) {
    const result = reduceTelemetry(view, message);
    view = result.view;
    effects.push(...result.effects);
  }
  return { view, effects };
}
