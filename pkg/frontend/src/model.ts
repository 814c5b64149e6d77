// Console view model: a pure reducer over the session event stream.
//
// Everything rendered derives from events (plus the read-only inventory and
// session snapshots); the model never invents state, so replaying the same
// events always reconstructs the identical view.

import type { Prompt, SessionEvent, SessionState } from './types.js';

export interface TimelineEntry {
  seq: number;
  kind: string;
  label: string;
}

export interface GaugeState {
  targetG: number;
  measuredG: number;
  done: boolean;
  withinTolerance: boolean | null;
}

export interface PromptCard extends Prompt {
  answered: boolean;
}

const num = (value: unknown): number => (typeof value === 'number' ? value : Number(value));
const str = (value: unknown): string => String(value ?? '');

function describe(event: SessionEvent): string | null {
  const p = event.payload;
  switch (event.kind) {
    case 'order':
      return `Order received: "${str(p.text)}"`;
    case 'state':
      return `State: ${str(p.from) || 'new'} -> ${str(p.to)}`;
    case 'recipe':
      return `Recipe: ${str(p.name)} (score ${num(p.score).toFixed(2)})`;
    case 'speech':
      return `"${str(p.text)}"`;
    case 'prompt':
      return `Prompt: ${str(p.text)}`;
    case 'answer':
      return `Answer: ${str(p.choice)} (${str(p.anomaly_id)})`;
    case 'program':
      return `Program ${str(p.program_id)}: ${(p.actions as string[]).join(', ')}`;
    case 'action_start':
      return `Start ${str(p.action)}`;
    case 'action_end':
      return `End ${str(p.action)}`;
    case 'pour_done':
      return `Poured ${num(p.final_mass_g).toFixed(1)} g of ${num(p.target_g).toFixed(1)} g target`;
    case 'report':
      return `Execution report: ${p.ok ? 'ok' : 'failed'}`;
    case 'error':
    case 'execution_failed':
      return `Error: ${JSON.stringify(p.detail ?? p.error ?? p)}`;
    default:
      return null; // pour_progress feeds the gauge, not the timeline
  }
}

export class ConsoleViewModel {
  sessionId: string;
  state: SessionState | 'unknown' = 'unknown';
  lastSeq = 0;
  timeline: TimelineEntry[] = [];
  prompts: PromptCard[] = [];
  gauge: GaugeState | null = null;
  speech: string[] = [];
  finalPours: number[] = [];
  reportOk: boolean | null = null;

  constructor(sessionId: string) {
    this.sessionId = sessionId;
  }

  /** Apply one event; events must arrive in seq order (the API guarantees it). */
  applyEvent(event: SessionEvent): void {
    if (event.seq <= this.lastSeq) return;
    this.lastSeq = event.seq;
    const p = event.payload;

    switch (event.kind) {
      case 'state':
        this.state = str(p.to) as SessionState;
        if (this.state !== 'AwaitingUser') this.prompts = [];
        break;
      case 'prompt':
        if (!this.prompts.some((card) => card.anomaly_id === str(p.anomaly_id))) {
          this.prompts.push({
            anomaly_id: str(p.anomaly_id),
            text: str(p.text),
            options: (p.options as string[]) ?? [],
            answered: false,
          });
        }
        break;
      case 'answer': {
        const card = this.prompts.find((c) => c.anomaly_id === str(p.anomaly_id));
        if (card) card.answered = true;
        break;
      }
      case 'speech':
        this.speech.push(str(p.text));
        break;
      case 'pour_progress':
        this.gauge = {
          targetG: num(p.target_g),
          measuredG: num(p.measured_g),
          done: Boolean(p.done),
          withinTolerance: null,
        };
        break;
      case 'pour_done':
        this.gauge = {
          targetG: num(p.target_g),
          measuredG: num(p.final_mass_g),
          done: true,
          withinTolerance: Boolean(p.within_tolerance),
        };
        this.finalPours.push(num(p.final_mass_g));
        break;
      case 'report':
        this.reportOk = Boolean(p.ok);
        break;
      default:
        break;
    }

    const label = describe(event);
    if (label !== null) {
      this.timeline.push({ seq: event.seq, kind: event.kind, label });
    }
  }

  applyAll(events: SessionEvent[]): void {
    for (const event of events) this.applyEvent(event);
  }

  /** Mark a prompt answered optimistically while the POST is in flight. */
  markAnswered(anomalyId: string): void {
    const card = this.prompts.find((c) => c.anomaly_id === anomalyId);
    if (card) card.answered = true;
  }

  openPrompts(): PromptCard[] {
    return this.prompts.filter((card) => !card.answered);
  }

  isTerminal(): boolean {
    return this.state === 'Served' || this.state === 'Failed' || this.state === 'Aborted';
  }
}
