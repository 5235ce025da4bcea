// Red-alert chime, synthesized with the Web Audio API; no asset files.
// Escalation is visual-only (flashing), so the chime is the only sound.

export interface ChimePlayer {
  play(): void;
}

export class WebAudioChime implements ChimePlayer {
  play(): void {
    const AudioContextClass =
      typeof window !== 'undefined'
        ? window.AudioContext ??
          (window as unknown as { webkitAudioContext?: typeof AudioContext }).webkitAudioContext
        : undefined;
    if (!AudioContextClass) return; // no-op outside the browser

    let ctx: AudioContext;
    try {
      ctx = new AudioContextClass();
    } catch {
      return;
    }
    try {
      const gain = ctx.createGain();
      gain.gain.setValueAtTime(0.5, ctx.currentTime);
      gain.gain.exponentialRampToValueAtTime(0.001, ctx.currentTime + 0.9);
      gain.connect(ctx.destination);

      const osc = ctx.createOscillator();
      osc.type = 'sine';
      osc.frequency.setValueAtTime(880, ctx.currentTime);
      osc.frequency.exponentialRampToValueAtTime(660, ctx.currentTime + 0.35);
      osc.connect(gain);
      osc.start(ctx.currentTime);
      osc.stop(ctx.currentTime + 0.9);
    } catch {
      // synthesis failure is non-fatal
    }
    setTimeout(() => void ctx.close().catch(() => undefined), 1200);
  }
}

/** Test double that counts invocations. */
export class CountingChime implements ChimePlayer {
  count = 0;
  play(): void {
    this.count += 1;
  }
}
