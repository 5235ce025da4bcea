// Session wiring: one telemetry socket, one command socket. Telemetry folds
// into the view model; effects (chime, flash) run once per message seq, so a
// reconnect replay rebuilds the identical view without replaying sounds.

import type { ChimePlayer } from './audio.js';
import { CommandEmitter } from './commands.js';
import { EffectRunner } from './effects.js';
import { parseCommandReply, parseTelemetry } from './protocol.js';
import {
  initialViewModel,
  reduceTelemetry,
  type DashboardViewModel,
} from './viewModel.js';

export interface ClientOptions {
  baseUrl: string; // e.g. ws://127.0.0.1:8008
  sessionId: string;
  chime: ChimePlayer;
  onViewChange: (view: DashboardViewModel) => void;
  onFlash?: () => void;
  reconnectDelayMs?: number;
}

export class DashboardClient {
  readonly emitter: CommandEmitter;
  view: DashboardViewModel = initialViewModel();

  private telemetry: WebSocket | null = null;
  private command: WebSocket | null = null;
  private readonly effects: EffectRunner;
  private closed = false;

  constructor(private readonly options: ClientOptions) {
    this.emitter = new CommandEmitter((cmd) => {
      this.command?.send(JSON.stringify(cmd));
    });
    this.effects = new EffectRunner(options.chime, options.onFlash);
  }

  connect(): void {
    const { baseUrl, sessionId } = this.options;
    this.telemetry = new WebSocket(`${baseUrl}/session/${sessionId}/telemetry`);
    this.telemetry.onmessage = (event) => this.handleTelemetry(event.data);
    this.telemetry.onopen = () => {
      // the server leads with a STATE snapshot; start from a clean view
      this.view = initialViewModel();
      this.options.onViewChange(this.view);
    };
    this.telemetry.onclose = () => this.scheduleReconnect();

    this.command = new WebSocket(`${baseUrl}/session/${sessionId}/command`);
    this.command.onopen = () => this.emitter.setConnected(true);
    this.command.onclose = () => this.emitter.setConnected(false);
    this.command.onmessage = (event) => {
      const reply = parseCommandReply(event.data);
      if (reply) this.emitter.handleReply(reply);
      else console.warn('malformed command reply', event.data);
    };
  }

  close(): void {
    this.closed = true;
    this.emitter.dispose();
    this.telemetry?.close();
    this.command?.close();
  }

  private handleTelemetry(data: unknown): void {
    const message = parseTelemetry(data);
    if (message === null) {
      console.warn('malformed telemetry message ignored', data);
      return; // view unchanged
    }
    const { view, effects } = reduceTelemetry(this.view, message);
    this.view = view;
    this.effects.run(effects);
    this.options.onViewChange(view);
  }

  private scheduleReconnect(): void {
    if (this.closed) return;
    const delay = this.options.reconnectDelayMs ?? 2000;
    setTimeout(() => {
      if (!this.closed) this.connect();
    }, delay);
  }
}
