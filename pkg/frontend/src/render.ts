// DOM rendering. Everything here is a dumb projection of the view model;
// all decisions live in viewModel.ts where they are unit-tested.

import { barFill, type DashboardViewModel } from './viewModel.js';

const LEVEL_COLORS: Record<string, string> = {
  green: '#22c55e',
  yellow: '#eab308',
  red: '#ef4444',
  red_escalated: '#ef4444',
  no_detections: '#71717a',
};

const BEHAVIOR_COLORS: Record<string, string> = {
  head_up: '#ef4444',
  running: '#f97316',
  grazing: '#22c55e',
  walking: '#3b82f6',
  standing: '#a1a1aa',
  other: '#71717a',
  unknown: '#52525b',
};

export interface Elements {
  bar: HTMLElement;
  barMarker: HTMLElement;
  scoreLabel: HTMLElement;
  banner: HTMLElement;
  canvas: HTMLCanvasElement;
  panel: HTMLElement;
  slider: HTMLInputElement;
  sliderLabel: HTMLElement;
  gap: HTMLElement;
}

export function lookupElements(root: Document): Elements {
  const byId = (id: string) => {
    const el = root.getElementById(id);
    if (!el) throw new Error(`missing dashboard element #${id}`);
    return el;
  };
  return {
    bar: byId('vigilance-bar-fill'),
    barMarker: byId('vigilance-bar-marker'),
    scoreLabel: byId('score-label'),
    banner: byId('alert-banner'),
    canvas: byId('herd-canvas') as HTMLCanvasElement,
    panel: byId('system-panel'),
    slider: byId('theta-slider') as HTMLInputElement,
    sliderLabel: byId('theta-label'),
    gap: byId('gap-indicator'),
  };
}

export function render(view: DashboardViewModel, els: Elements, sliderActive: boolean): void {
  // vigilance bar
  const fill = barFill(view.score);
  els.bar.style.width = `${(fill * 100).toFixed(1)}%`;
  els.bar.style.background = LEVEL_COLORS[view.level] ?? LEVEL_COLORS['no_detections']!;
  els.barMarker.style.left = `${(view.thetaS * 100).toFixed(1)}%`;
  els.scoreLabel.textContent =
    view.score === null ? 'score: -' : `score: ${view.score.toFixed(2)}`;

  // threshold slider reflects server state unless the operator is dragging
  if (!sliderActive) {
    els.slider.value = String(view.thetaS);
  }
  els.sliderLabel.textContent = `threshold ${Number(els.slider.value).toFixed(2)}`;

  // banner
  els.banner.className = `banner banner-${view.banner}`;
  const bannerText: Record<string, string> = {
    none: '',
    yellow: 'elevated vigilance',
    red: 'HIGH VIGILANCE',
    red_flashing: 'HIGH VIGILANCE - SUSTAINED',
    degraded: 'model degraded',
  };
  let text = bannerText[view.banner] ?? '';
  if (view.operatorResponding && (view.banner === 'red' || view.banner === 'red_flashing')) {
    text += ' (operator responding)';
  }
  els.banner.textContent = text;

  // schematic herd view
  drawHerd(view, els.canvas);

  // system panel
  const p = view.panel;
  els.panel.innerHTML = '';
  const rows: Array<[string, string]> = [
    ['mission', p.missionId || '-'],
    ['status', view.missionEnded ? `${p.status} (ended)` : p.status],
    ['mode', p.navigationMode],
    ['drone', p.droneState],
    ['battery', p.batteryPct === null ? '-' : `${p.batteryPct.toFixed(0)}%`],
    ['model conf', p.modelConfidence === null ? '-' : p.modelConfidence.toFixed(2)],
    ['speed', p.speed === null ? 'afap' : `${p.speed}x`],
    ['herd', p.herdSize === null ? '-' : `${p.herdSize} ${p.species}`],
    ['latency', view.latencyMs === null ? '-' : `${view.latencyMs.toFixed(1)} ms`],
  ];
  for (const [label, value] of rows) {
    const div = document.createElement('div');
    div.className = 'panel-row';
    const labelSpan = document.createElement('span');
    labelSpan.className = 'panel-label';
    labelSpan.textContent = label;
    const valueSpan = document.createElement('span');
    valueSpan.className = 'panel-value';
    valueSpan.textContent = value;
    div.append(labelSpan, valueSpan);
    els.panel.append(div);
  }

  els.gap.textContent = view.gap
    ? `dropped telemetry seq ${view.gap.from}-${view.gap.to}`
    : '';
}

function drawHerd(view: DashboardViewModel, canvas: HTMLCanvasElement): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = '#18181b';
  ctx.fillRect(0, 0, width, height);

  for (const ind of view.herd) {
    const [x, y, w, h] = ind.bbox;
    const color = BEHAVIOR_COLORS[ind.behavior] ?? BEHAVIOR_COLORS['unknown']!;
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.strokeRect(x * width, y * height, w * width, h * height);
    ctx.fillStyle = color;
    ctx.font = '11px monospace';
    ctx.fillText(
      `${ind.id} ${ind.behavior} ${(ind.detection_confidence * 100).toFixed(0)}%`,
      x * width,
      Math.max(10, y * height - 3),
    );
  }
  if (view.centroid) {
    ctx.fillStyle = '#f4f4f5';
    ctx.beginPath();
    ctx.arc(view.centroid[0] * width, view.centroid[1] * height, 4, 0, Math.PI * 2);
    ctx.fill();
  }
  if (view.degraded) {
    ctx.fillStyle = '#eab308';
    ctx.font = '14px monospace';
    ctx.fillText('no confident detections', 12, height - 14);
  }
}
