// DOM rendering for the console. Render is a pure function of the view
// model; event handlers only call the API and never mutate rendered truth.

import type { ApiClient } from './api.js';
import type { ConsoleViewModel } from './model.js';
import type { InventorySnapshot } from './types.js';

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderInventory(root: HTMLElement, snapshot: InventorySnapshot | null): void {
  root.innerHTML = '';
  if (!snapshot) {
    root.appendChild(el('p', 'empty', 'No inventory snapshot yet.'));
    return;
  }
  const table = el('table', 'inventory-table');
  const head = el('tr', '');
  for (const title of ['Label', 'Available (ml)', 'Position', 'Readable']) {
    head.appendChild(el('th', '', title));
  }
  table.appendChild(head);
  for (const item of snapshot.items) {
    const row = el('tr', item.readable ? 'readable' : 'unreadable');
    row.appendChild(el('td', 'label', item.label));
    row.appendChild(el('td', 'volume', item.available_ml.toFixed(0)));
    row.appendChild(
      el('td', 'pose', `(${item.pose_world[0].toFixed(2)}, ${item.pose_world[1].toFixed(2)})`),
    );
    row.appendChild(el('td', 'readable-flag', item.readable ? 'yes' : 'no'));
    table.appendChild(row);
  }
  root.appendChild(table);
}

export function renderSession(
  root: HTMLElement,
  model: ConsoleViewModel,
  api: ApiClient,
): void {
  root.innerHTML = '';

  const header = el('div', 'session-header');
  header.appendChild(el('span', 'session-id', model.sessionId));
  header.appendChild(el('span', `session-state state-${model.state}`, model.state));
  root.appendChild(header);

  const prompts = el('div', 'prompt-queue');
  for (const card of model.prompts) {
    const cardEl = el('div', card.answered ? 'prompt-card answered' : 'prompt-card');
    cardEl.dataset.anomalyId = card.anomaly_id;
    cardEl.appendChild(el('p', 'prompt-text', card.text));
    const buttons = el('div', 'prompt-options');
    for (const option of card.options) {
      const button = el('button', 'prompt-option', option) as HTMLButtonElement;
      button.disabled = card.answered;
      button.addEventListener('click', () => {
        model.markAnswered(card.anomaly_id);
        renderSession(root, model, api);
        void api.answerPrompt(model.sessionId, card.anomaly_id, option);
      });
      buttons.appendChild(button);
    }
    cardEl.appendChild(buttons);
    prompts.appendChild(cardEl);
  }
  root.appendChild(prompts);

  const gauge = el('div', 'pour-gauge');
  if (model.gauge) {
    const fraction = model.gauge.targetG > 0 ? model.gauge.measuredG / model.gauge.targetG : 0;
    const pct = Math.max(0, Math.min(1.05, fraction)) * 100;
    const bar = el('div', 'gauge-bar');
    const fill = el('div', model.gauge.done ? 'gauge-fill done' : 'gauge-fill');
    fill.style.width = `${pct.toFixed(1)}%`;
    bar.appendChild(fill);
    gauge.appendChild(bar);
    const reading = el(
      'span',
      'gauge-reading',
      `${model.gauge.measuredG.toFixed(1)} g / ${model.gauge.targetG.toFixed(1)} g`,
    );
    gauge.appendChild(reading);
  }
  root.appendChild(gauge);

  const timeline = el('ol', 'timeline');
  for (const entry of model.timeline) {
    const item = el('li', `timeline-entry kind-${entry.kind}`, entry.label);
    item.dataset.seq = String(entry.seq);
    timeline.appendChild(item);
  }
  root.appendChild(timeline);
}
