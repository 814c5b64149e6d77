// Console acceptance tests against a fixture server that replays a recorded
// session event log (missing-sugar flow answered with honey).

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { describe, expect, it } from 'vitest';

import { ApiClient, type Transport } from '../src/api.js';
import { ConsoleViewModel } from '../src/model.js';
import { renderSession } from '../src/view.js';
import type { SessionEvent, SessionView } from '../src/types.js';

interface Fixture {
  session_id: string;
  inventory: unknown;
  events: SessionEvent[];
  final_view: SessionView & { report: { traces: { outcome: { final_mass_g: number } }[] } };
  answer_seq: number;
  expected_prompt_text: string;
  expected_final_mass_g: number;
}

const fixture: Fixture = JSON.parse(
  readFileSync(join(dirname(fileURLToPath(import.meta.url)), 'fixtures', 'session.json'), 'utf-8'),
);

/**
 * Replays the recorded log with long-poll semantics: events strictly after
 * the recorded answer stay unreleased until the client posts an answer,
 * exactly like the live orchestrator would block in AwaitingUser.
 */
class FixtureServer implements Transport {
  released: number;
  postedAnswers: { anomaly_id: string; choice: string }[] = [];
  private readonly chunk: number;

  constructor(chunk = 7) {
    this.chunk = chunk;
    this.released = 0;
  }

  private gate(): number {
    // Until the answer arrives, nothing at or past the answer event is visible.
    return this.postedAnswers.length > 0 ? fixture.events.length : fixture.answer_seq - 1;
  }

  async get(path: string): Promise<string> {
    if (path.startsWith(`/v1/sessions/${fixture.session_id}/events`)) {
      const since = Number(new URL(path, 'http://x').searchParams.get('since') ?? '0');
      this.released = Math.min(Math.max(this.released, since) + this.chunk, this.gate());
      return fixture.events
        .filter((e) => e.seq > since && e.seq <= this.released)
        .map((e) => JSON.stringify(e))
        .join('\n');
    }
    if (path === `/v1/sessions/${fixture.session_id}`) {
      return JSON.stringify(fixture.final_view);
    }
    if (path === '/v1/inventory') return JSON.stringify(fixture.inventory);
    throw new Error(`unexpected GET ${path}`);
  }

  async send(method: string, path: string, body?: unknown): Promise<string> {
    if (method === 'POST' && path === `/v1/sessions/${fixture.session_id}/answers`) {
      this.postedAnswers.push(body as { anomaly_id: string; choice: string });
      return JSON.stringify(fixture.final_view);
    }
    throw new Error(`unexpected ${method} ${path}`);
  }
}

async function drive(
  onRender: (model: ConsoleViewModel, root: HTMLElement, api: ApiClient) => Promise<void> | void,
): Promise<{ model: ConsoleViewModel; root: HTMLElement; server: FixtureServer }> {
  const server = new FixtureServer();
  const api = new ApiClient(server);
  const model = new ConsoleViewModel(fixture.session_id);
  const root = document.createElement('div');
  document.body.appendChild(root);
  const signal = { aborted: false };
  for await (const event of api.events(fixture.session_id, 0, { signal })) {
    model.applyEvent(event);
    renderSession(root, model, api);
    await onRender(model, root, api);
    if (model.isTerminal() && model.lastSeq >= fixture.events.length) break;
  }
  signal.aborted = true;
  return { model, root, server };
}

describe('operator console', () => {
  it('renders the substitution prompt at AwaitingUser and posts the answer', async () => {
    let sawPromptInAwaitingUser = false;
    const { model, server } = await drive(async (m, root) => {
      if (m.state === 'AwaitingUser' && m.openPrompts().length > 0 && !sawPromptInAwaitingUser) {
        sawPromptInAwaitingUser = true;
        const card = root.querySelector('.prompt-card')!;
        expect(card.querySelector('.prompt-text')!.textContent).toBe(
          fixture.expected_prompt_text,
        );
        const honey = [...card.querySelectorAll('button')].find(
          (b) => b.textContent === 'honey',
        )!;
        honey.click();
        await Promise.resolve(); // let the fire-and-forget POST settle
      }
    });
    expect(sawPromptInAwaitingUser).toBe(true);
    expect(server.postedAnswers).toEqual([
      { anomaly_id: fixture.events.find((e) => e.kind === 'prompt')!.payload.anomaly_id, choice: 'honey' },
    ]);
    // The timeline resumed past the prompt and the session finished.
    expect(model.state).toBe('Served');
    expect(model.timeline.at(-1)!.label).toContain('Served');
  });

  it('disables the answered prompt card optimistically', async () => {
    await drive(async (m, root) => {
      if (m.state === 'AwaitingUser' && m.openPrompts().length > 0) {
        const button = [...root.querySelectorAll('button')].find(
          (b) => b.textContent === 'honey',
        )!;
        button.click();
        renderSession(root, m, new ApiClient(new FixtureServer()));
        const card = root.querySelector('.prompt-card')!;
        expect(card.className).toContain('answered');
        expect(
          [...card.querySelectorAll('button')].every((b) => (b as HTMLButtonElement).disabled),
        ).toBe(true);
      }
    });
  });

  it('shows a pour gauge whose final value matches the report final mass', async () => {
    const { model, root, server } = await drive(async (m, root_) => {
      if (m.state === 'AwaitingUser' && m.openPrompts().length > 0) {
        [...root_.querySelectorAll('button')]
          .find((b) => b.textContent === 'honey')!
          .click();
        await Promise.resolve();
      }
    });
    expect(model.gauge).not.toBeNull();
    expect(model.gauge!.done).toBe(true);
    const reportTraces = fixture.final_view.report.traces;
    expect(model.gauge!.measuredG).toBe(
      reportTraces[reportTraces.length - 1].outcome.final_mass_g,
    );
    expect(model.finalPours).toEqual(reportTraces.map((t) => t.outcome.final_mass_g));
    expect(root.querySelector('.gauge-reading')!.textContent).toContain(
      model.gauge!.targetG.toFixed(1),
    );
    expect(server.postedAnswers.length).toBe(1);
  });

  it('timeline ordering always equals event seq order', async () => {
    const { model } = await drive(async (m, root) => {
      if (m.state === 'AwaitingUser' && m.openPrompts().length > 0) {
        [...root.querySelectorAll('button')].find((b) => b.textContent === 'honey')!.click();
        await Promise.resolve();
      }
    });
    const seqs = model.timeline.map((e) => e.seq);
    expect([...seqs].sort((a, b) => a - b)).toEqual(seqs);
    const eventSeqs = new Set(fixture.events.map((e) => e.seq));
    expect(seqs.every((s) => eventSeqs.has(s))).toBe(true);
  });

  it('page refresh mid-run reconstructs the identical timeline', () => {
    const cut = Math.floor(fixture.events.length * 0.6);
    const live = new ConsoleViewModel(fixture.session_id);
    live.applyAll(fixture.events.slice(0, cut));

    // A refreshed page re-reads the event log from seq 0.
    const refreshed = new ConsoleViewModel(fixture.session_id);
    refreshed.applyAll(fixture.events.slice(0, cut));

    expect(refreshed.timeline).toEqual(live.timeline);
    expect(refreshed.state).toBe(live.state);
    expect(refreshed.gauge).toEqual(live.gauge);
    expect(refreshed.prompts).toEqual(live.prompts);
  });

  it('reconnect resumes from last seq with no gaps or duplicates', async () => {
    const server = new FixtureServer(5);
    server.postedAnswers.push({ anomaly_id: 'pre', choice: 'honey' }); // open the gate
    const api = new ApiClient(server);
    const firstHalf: SessionEvent[] = [];
    const signal = { aborted: false };
    for await (const event of api.events(fixture.session_id, 0, { signal })) {
      firstHalf.push(event);
      if (firstHalf.length >= 40) break;
    }
    signal.aborted = true;

    const rest: SessionEvent[] = [];
    const signal2 = { aborted: false };
    for await (const event of api.events(fixture.session_id, firstHalf.at(-1)!.seq, {
      signal: signal2,
    })) {
      rest.push(event);
      if (event.seq >= fixture.events.length) break;
    }
    signal2.aborted = true;

    const seqs = [...firstHalf, ...rest].map((e) => e.seq);
    expect(seqs).toEqual(fixture.events.map((e) => e.seq));
  });

  it('no hidden state: the full event log rebuilds the terminal view exactly', () => {
    const model = new ConsoleViewModel(fixture.session_id);
    model.applyAll(fixture.events);
    expect(model.state).toBe('Served');
    expect(model.reportOk).toBe(true);
    expect(model.lastSeq).toBe(fixture.events.length);
    expect(model.gauge!.measuredG).toBe(fixture.expected_final_mass_g);
  });
});
