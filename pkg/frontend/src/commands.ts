// Operator command emission: slider clamping, rate limiting, ack locking,
// and offline queueing with a visible stale counter.

import type { CommandReply, OperatorCommand } from './protocol.js';

export const THETA_MIN = 0.1;
export const THETA_MAX = 0.9;

export function clampTheta(value: number): number {
  if (Number.isNaN(value)) return THETA_MIN;
  return Math.min(THETA_MAX, Math.max(THETA_MIN, value));
}

export interface EmitterHooks {
  now?: () => number;
  schedule?: (fn: () => void, delayMs: number) => unknown;
  cancel?: (handle: unknown) => void;
}

/**
 * Emits operator commands over a send callback.
 *
 * Slider updates are rate-limited to at most one SET_THRESHOLD per
 * `minIntervalMs` (default 200 ms, i.e. <= 5 messages per second) with the
 * latest value always delivered. Button commands lock the controls until the
 * matching ACK/REJECTED arrives. When disconnected, commands queue locally
 * and `staleCount` exposes how many are waiting.
 */
export class CommandEmitter {
  private readonly send: (command: OperatorCommand) => void;
  private readonly minIntervalMs: number;
  private readonly now: () => number;
  private readonly schedule: (fn: () => void, delayMs: number) => unknown;
  private readonly cancel: (handle: unknown) => void;

  private connected = false;
  private lastSentAt = -Infinity;
  private pendingTheta: number | null = null;
  private pendingHandle: unknown = null;
  private queue: OperatorCommand[] = [];
  private awaitingAck = 0;

  constructor(
    send: (command: OperatorCommand) => void,
    minIntervalMs = 200,
    hooks: EmitterHooks = {},
  ) {
    this.send = send;
    this.minIntervalMs = minIntervalMs;
    this.now = hooks.now ?? (() => Date.now());
    this.schedule = hooks.schedule ?? ((fn, delay) => setTimeout(fn, delay));
    this.cancel = hooks.cancel ?? ((handle) => clearTimeout(handle as number));
  }

  get staleCount(): number {
    return this.queue.length + (this.pendingTheta !== null ? 1 : 0);
  }

  get controlsLocked(): boolean {
    return this.awaitingAck > 0;
  }

  setConnected(connected: boolean): void {
    this.connected = connected;
    if (connected) {
      const queued = this.queue;
      this.queue = [];
      for (const command of queued) this.dispatch(command);
      this.flushThreshold();
    }
  }

  /** Slider drag handler; value is clamped client-side before anything else. */
  setThreshold(value: number): number {
    const clamped = clampTheta(value);
    this.pendingTheta = clamped;
    if (!this.connected) return clamped;
    const elapsed = this.now() - this.lastSentAt;
    if (elapsed >= this.minIntervalMs) {
      this.flushThreshold();
    } else if (this.pendingHandle === null) {
      this.pendingHandle = this.schedule(() => {
        this.pendingHandle = null;
        this.flushThreshold();
      }, this.minIntervalMs - elapsed);
    }
    return clamped;
  }

  pause(): void {
    this.button({ kind: 'PAUSE' });
  }

  retreat(): void {
    this.button({ kind: 'RETREAT' });
  }

  resume(): void {
    this.button({ kind: 'RESUME' });
  }

  stop(): void {
    this.button({ kind: 'STOP' });
  }

  startReplay(): void {
    this.button({ kind: 'START_REPLAY' });
  }

  setSpeed(speed: number | 'afap'): void {
    this.button({ kind: 'SET_SPEED', speed });
  }

  handleReply(reply: CommandReply): void {
    if (this.awaitingAck > 0) this.awaitingAck -= 1;
  }

  dispose(): void {
    if (this.pendingHandle !== null) {
      this.cancel(this.pendingHandle);
      this.pendingHandle = null;
    }
  }

  private button(command: OperatorCommand): void {
    if (!this.connected) {
      this.queue.push(command);
      return;
    }
    this.awaitingAck += 1;
    this.dispatch(command);
  }

  private dispatch(command: OperatorCommand): void {
    this.send(command);
  }

  private flushThreshold(): void {
    if (this.pendingTheta === null || !this.connected) return;
    const value = this.pendingTheta;
    this.pendingTheta = null;
    this.lastSentAt = this.now();
    this.dispatch({ kind: 'SET_THRESHOLD', theta_s: value });
  }
}
