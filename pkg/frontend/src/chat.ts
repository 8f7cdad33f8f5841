/**
 * Chat view state as a pure reducer over service frames. The invariant
 * here is the one the chooser depends on: at most one clarification is
 * pending at a time — later clarify frames queue behind it instead of
 * overlapping.
 */

export interface Candidate {
  uri: string;
  label: string;
  confidence: number;
}

export interface ClarifyFrame {
  type: "clarify";
  text: string;
  surface?: string;
  candidates: Candidate[];
}

export interface TraceFrame {
  type: "trace";
  entries: Array<{ node: string; status: string }>;
}

export interface TextFrame {
  type: "user" | "answer" | "error";
  text: string;
  [artifact: string]: unknown;
}

export type Frame = TextFrame | ClarifyFrame | TraceFrame;

export interface ChatViewState {
  frames: Frame[];
  pending: ClarifyFrame | null;
  queued: ClarifyFrame[];
}

export const emptyChat: ChatViewState = { frames: [], pending: null, queued: [] };

export function userMessage(state: ChatViewState, text: string): ChatViewState {
  return { ...state, frames: [...state.frames, { type: "user", text }] };
}

/** Fold a service response (a frame list) into the view state. */
export function receiveFrames(state: ChatViewState, incoming: Frame[]): ChatViewState {
  let pending = state.pending;
  const queued = [...state.queued];
  for (const frame of incoming) {
    if (frame.type !== "clarify") continue;
    if (pending === null) {
      pending = frame;
    } else {
      queued.push(frame);
    }
  }
  return { frames: [...state.frames, ...incoming], pending, queued };
}

export interface ChoiceSubmission {
  state: ChatViewState;
  outbound: { choice: number };
}

/**
 * Resolve the pending clarification with the picked option. The chooser
 * is dismissed; the next queued clarification (if any) takes its place.
 */
export function submitChoice(state: ChatViewState, index: number): ChoiceSubmission {
  const pending = state.pending;
  if (!pending) throw new Error("no clarification is pending");
  if (index < 0 || index >= pending.candidates.length) {
    throw new Error(`choice ${index} out of range (0..${pending.candidates.length - 1})`);
  }
  const [next, ...rest] = state.queued;
  return {
    state: { ...state, pending: next ?? null, queued: rest },
    outbound: { choice: index },
  };
}

/** A stale-session (or otherwise failed) resume renders as an error frame. */
export function dismissPending(state: ChatViewState, message: string): ChatViewState {
  const [next, ...rest] = state.queued;
  return {
    frames: [...state.frames, { type: "error", text: message }],
    pending: next ?? null,
    queued: rest,
  };
}
