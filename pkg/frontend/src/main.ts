// Bootstrap: read ?host= and ?session= from the URL, wire sockets to DOM.

import { WebAudioChime } from './audio.js';
import { DashboardClient } from './client.js';
import { clampTheta } from './commands.js';
import { lookupElements, render } from './render.js';

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const host = params.get('host') ?? `${window.location.hostname}:8008`;
  const sessionId = params.get('session');
  const els = lookupElements(document);
  if (!sessionId) {
    els.banner.textContent = 'add ?session=<id> (create one via POST /sessions)';
    els.banner.className = 'banner banner-degraded';
    return;
  }

  let sliderActive = false;
  const client = new DashboardClient({
    baseUrl: `ws://${host}`,
    sessionId,
    chime: new WebAudioChime(),
    onViewChange: (view) => render(view, els, sliderActive),
    onFlash: () => els.banner.classList.add('banner-flashing'),
  });

  els.slider.addEventListener('pointerdown', () => {
    sliderActive = true;
  });
  els.slider.addEventListener('input', () => {
    const clamped = client.emitter.setThreshold(Number(els.slider.value));
    els.slider.value = String(clamped);
    els.sliderLabel.textContent = `threshold ${clamped.toFixed(2)}`;
  });
  els.slider.addEventListener('change', () => {
    sliderActive = false;
  });

  const button = (id: string, action: () => void) => {
    document.getElementById(id)?.addEventListener('click', action);
  };
  button('btn-pause', () => client.emitter.pause());
  button('btn-retreat', () => client.emitter.retreat());
  button('btn-resume', () => client.emitter.resume());
  button('btn-start', () => client.emitter.startReplay());
  button('btn-stop', () => client.emitter.stop());

  els.slider.min = '0.1';
  els.slider.max = '0.9';
  els.slider.step = '0.01';
  els.slider.value = String(clampTheta(0.3));

  client.connect();
}

main();
