// Effect execution with a seq watermark: reducing a telemetry log is pure
// and repeatable, but sounds and flashes must fire once per original
// message, never again when a log is replayed after a reconnect.

import type { ChimePlayer } from './audio.js';
import type { Effect } from './viewModel.js';

export class EffectRunner {
  private watermark = 0;

  constructor(
    private readonly chime: ChimePlayer,
    private readonly onFlash?: () => void,
  ) {}

  run(effects: Effect[]): void {
    for (const effect of effects) {
      if (effect.seq <= this.watermark) continue;
      this.watermark = effect.seq;
      if (effect.kind === 'chime') this.chime.play();
      if (effect.kind === 'flash') this.onFlash?.();
    }
  }
}
