// A recorded telemetry log, exactly as the ground-control service emits it:
// green -> yellow -> red (debounced, audio chime) -> escalate (flashing),
// then mission end. Seq numbers are consecutive; each frame broadcasts a
// SAMPLE, any ALERT, and one LATENCY message, in that order.

import type { HerdIndividual, TelemetryMessage } from '../src/protocol.js';

function herd(vigilant: number): HerdIndividual[] {
  const individuals: HerdIndividual[] = [];
  for (let i = 0; i < 4; i += 1) {
    individuals.push({
      id: `ind-${i}`,
      bbox: [0.1 + 0.18 * i, 0.3, 0.1, 0.12],
      behavior: i < vigilant ? 'head_up' : 'grazing',
      detection_confidence: 0.9,
      behavior_confidence: 0.88,
    });
  }
  return individuals;
}

let seqCounter = 0;
const seq = () => {
  seqCounter += 1;
  return seqCounter;
};

function sample(
  frame: number,
  score: number,
  level: string,
  individuals: HerdIndividual[],
): TelemetryMessage {
  return {
    kind: 'SAMPLE',
    seq: seq(),
    payload: {
      frame_index: frame,
      timestamp_ms: Math.round((frame * 1000) / 30),
      score,
      level,
      n_included: individuals.length,
      n_adverse: individuals.filter((i) => i.behavior === 'head_up').length,
      n_detected_raw: individuals.length,
      centroid: [0.4, 0.36],
      degraded: false,
      theta_s: 0.3,
      individuals,
    },
  } as TelemetryMessage;
}

function latency(frame: number): TelemetryMessage {
  return {
    kind: 'LATENCY',
    seq: seq(),
    payload: { frame_index: frame, score_ms: 0.02, alert_ms: 0.01, total_ms: 0.03 },
  } as TelemetryMessage;
}

function alert(kind: string, frame: number, score: number | null, audio: boolean, flashing: boolean): TelemetryMessage {
  return {
    kind: 'ALERT',
    seq: seq(),
    payload: {
      kind,
      timestamp_ms: Math.round((frame * 1000) / 30),
      score,
      audio,
      flashing,
    },
  } as TelemetryMessage;
}

export function recordedEscalationLog(): TelemetryMessage[] {
  seqCounter = 0;
  const log: TelemetryMessage[] = [];
  // late-join snapshot (seq stays at the current counter, here 0)
  log.push({
    kind: 'STATE',
    seq: 0,
    payload: {
      mission_id: 'fixture-1',
      status: 'running',
      theta_s: 0.3,
      speed: 1.0,
      drone_state: 'tracking',
      navigation_mode: 'synthetic',
      battery_pct: 100.0,
      model_confidence: 0.9,
      frame_index: null,
      score: null,
      level: 'green',
      degraded: false,
      herd_size: 4,
      species: 'zebra',
      snapshot: true,
    },
  } as TelemetryMessage);

  // frame 0: calm
  log.push(sample(0, 0.0, 'green', herd(0)), latency(0));
  // frame 1: yellow band
  log.push(sample(1, 0.25, 'yellow', herd(1)));
  log.push(alert('enter_yellow', 1, 0.25, false, false));
  log.push(latency(1));
  // frames 2-3: above threshold but the red warning is still debouncing
  log.push(sample(2, 0.5, 'yellow', herd(2)), latency(2));
  log.push(sample(3, 0.5, 'yellow', herd(2)), latency(3));
  // frame 4: third consecutive exceedance -> red with a single chime
  log.push(sample(4, 0.5, 'red', herd(2)));
  log.push(alert('enter_red', 4, 0.5, true, false));
  log.push(latency(4));
  // frames 5-6: red persists
  log.push(sample(5, 0.75, 'red', herd(3)), latency(5));
  log.push(sample(6, 0.75, 'red', herd(3)), latency(6));
  // frame 7: persistence exceeded -> escalation, flashing prompt
  log.push(sample(7, 0.75, 'red_escalated', herd(3)));
  log.push(alert('escalate', 7, 0.75, false, true));
  log.push(latency(7));
  log.push({
    kind: 'MISSION_END',
    seq: seq(),
    payload: { status: 'finished', frames_processed: 7 },
  } as TelemetryMessage);
  return log;
}
