/** Transcript view-model: a pure projection of gateway wire data.
 *
 * The console never fabricates turns; the state is either the gateway's
 * stored session (after reload) or the accumulated turn deltas, and the
 * two must be indistinguishable.
 */

import type {
  SessionResponse,
  TriggerLogEntryWire,
  TurnResponse,
  WireTurn,
} from "./api.js";

export interface TranscriptState {
  turns: WireTurn[];
  triggerLog: TriggerLogEntryWire[];
}

export interface TriggerChip {
  keyword: string;
  argument: string;
  status: "ok" | "error";
  latencyMs: number | null;
  backendId: string | null;
  errorMessage: string | null;
}

export interface OverlayPair {
  original: string | null;
  overlay: string;
}

export interface ViewTurn {
  role: WireTurn["role"];
  text: string;
  images: string[];
  chips: TriggerChip[];
  /** expert-feedback turns start collapsed but stay auditable */
  collapsed: boolean;
  overlayPair: OverlayPair | null;
}

export function emptyState(): TranscriptState {
  return { turns: [], triggerLog: [] };
}

export function fromSession(session: SessionResponse): TranscriptState {
  return { turns: session.turns, triggerLog: session.trigger_log };
}

export function withDelta(state: TranscriptState, delta: TurnResponse): TranscriptState {
  return {
    turns: [...state.turns, ...delta.turns_delta],
    triggerLog: [...state.triggerLog, ...delta.triggers],
  };
}

export function statesEqual(a: TranscriptState, b: TranscriptState): boolean {
  return JSON.stringify(a) === JSON.stringify(b);
}

function turnText(turn: WireTurn): string {
  return turn.content
    .filter((item) => item.type === "text")
    .map((item) => item.value)
    .join("\n");
}

function turnImages(turn: WireTurn): string[] {
  return turn.content.filter((item) => item.type === "image").map((item) => item.value);
}

function chipFromEntry(entry: TriggerLogEntryWire): TriggerChip {
  return {
    keyword: entry.event.keyword,
    argument: entry.event.argument,
    status: entry.status,
    latencyMs: entry.result ? entry.result.latency_ms : null,
    backendId: entry.result ? entry.result.backend_id : null,
    errorMessage: entry.error_message ?? null,
  };
}

function triggerLiteral(entry: TriggerLogEntryWire): string {
  return `<${entry.event.keyword}(${entry.event.argument})>`;
}

/** Project wire turns + trigger log into renderable view turns.
 *
 * Each trigger-log entry becomes exactly one chip, attached to the
 * assistant turn that carried its literal. Expert-feedback turns are
 * collapsed by default and pair their overlay with the most recent user
 * image for side-by-side display.
 */
export function buildViewTurns(state: TranscriptState): ViewTurn[] {
  const views: ViewTurn[] = [];
  let logIndex = 0;
  let lastUserImage: string | null = null;
  for (const turn of state.turns) {
    const text = turnText(turn);
    const images = turnImages(turn);
    const view: ViewTurn = {
      role: turn.role,
      text,
      images,
      chips: [],
      collapsed: turn.role === "expert-feedback",
      overlayPair: null,
    };
    if (turn.role === "user" && images.length > 0) {
      lastUserImage = images[images.length - 1] ?? null;
    }
    if (turn.role === "assistant") {
      while (
        logIndex < state.triggerLog.length &&
        text.includes(triggerLiteral(state.triggerLog[logIndex]!))
      ) {
        view.chips.push(chipFromEntry(state.triggerLog[logIndex]!));
        logIndex += 1;
      }
    }
    if (turn.role === "expert-feedback" && images.length > 0) {
      view.overlayPair = { original: lastUserImage, overlay: images[0]! };
    }
    views.push(view);
  }
  return views;
}

export function chipCount(views: ViewTurn[]): number {
  return views.reduce((total, view) => total + view.chips.length, 0);
}

/** Canned request phrasings for the what-if rerun control. */
const WHAT_IF_TEMPLATES: Record<string, string> = {
  skeleton: "Can you assist me in segmenting the bony structures in this image?",
  "hepatic tumor": "Can you identify any liver masses or tumors?",
  "pancreatic tumor": "Can you identify any pancreatic masses or tumors?",
  "lung tumor": "Can you identify any lung masses or tumors?",
  everything: "Segment the entire image.",
  "brain tumor": "Can you identify any tumor in this brain MRI?",
};

export function whatIfMessage(argument: string): string {
  return WHAT_IF_TEMPLATES[argument] ?? `Can you segment the ${argument} in this image?`;
}
