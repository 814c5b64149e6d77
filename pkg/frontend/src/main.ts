// Console bootstrap: order form, inventory table, live session view.

import { ApiClient, HttpTransport } from './api.js';
import { ConsoleViewModel } from './model.js';
import { renderInventory, renderSession } from './view.js';

const api = new ApiClient(new HttpTransport(''));

const sessionRoot = document.getElementById('session')!;
const inventoryRoot = document.getElementById('inventory')!;
const orderForm = document.getElementById('order-form') as HTMLFormElement;
const orderInput = document.getElementById('order-text') as HTMLInputElement;
const sessionList = document.getElementById('session-list')!;

const knownSessions: string[] = [];
let activeFollow: { aborted: boolean } | null = null;

async function refreshInventory(): Promise<void> {
  try {
    renderInventory(inventoryRoot, await api.getInventory());
  } catch {
    renderInventory(inventoryRoot, null);
  }
}

function addSessionLink(sessionId: string): void {
  if (knownSessions.includes(sessionId)) return;
  knownSessions.push(sessionId);
  const link = document.createElement('a');
  link.href = `#${sessionId}`;
  link.textContent = sessionId;
  link.addEventListener('click', (ev) => {
    ev.preventDefault();
    void followSession(sessionId);
  });
  sessionList.appendChild(link);
}

async function followSession(sessionId: string): Promise<void> {
  if (activeFollow) activeFollow.aborted = true;
  const signal = { aborted: false };
  activeFollow = signal;

  // Rebuild the entire view from the server's event log: no hidden state.
  const model = new ConsoleViewModel(sessionId);
  renderSession(sessionRoot, model, api);
  for await (const event of api.events(sessionId, 0, { signal, timeoutS: 25 })) {
    model.applyEvent(event);
    renderSession(sessionRoot, model, api);
    if (model.isTerminal()) break;
  }
  signal.aborted = true;
}

orderForm.addEventListener('submit', (ev) => {
  ev.preventDefault();
  void (async () => {
    const response = await api.placeOrder(orderInput.value);
    if (response.session_id) {
      addSessionLink(response.session_id);
      await followSession(response.session_id);
    }
  })();
});

void refreshInventory();
setInterval(() => void refreshInventory(), 5000);

// Deep link: #s-0001 resumes a session view after a page refresh.
if (window.location.hash.length > 1) {
  const sessionId = window.location.hash.slice(1);
  addSessionLink(sessionId);
  void followSession(sessionId);
}
