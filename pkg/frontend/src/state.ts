// Pure session-state transitions. The UI renders exactly what the server
// returned — nothing here fabricates data.

import type { TracePayload } from "./api.js";

export type InspectorTab = "trace" | "memories" | "summaries" | "profile";

export interface ChatMessage {
  from: "you" | "bot";
  text: string;
  traceId?: string;
}

export interface UiSessionState {
  userId: string;
  messages: ChatMessage[];
  draft: string;
  busy: boolean;
  banner: string | null;
  traces: Record<string, TracePayload>;
  selectedTraceId: string | null;
  inspectorTab: InspectorTab;
}

export function initialState(userId: string): UiSessionState {
  return {
    userId,
    messages: [],
    draft: "",
    busy: false,
    banner: null,
    traces: {},
    selectedTraceId: null,
    inspectorTab: "trace",
  };
}

export function setDraft(state: UiSessionState, draft: string): UiSessionState {
  return { ...state, draft };
}

/** Local echo + input lock. Returns null when sending is not allowed
 * (empty draft, or a request already in flight — mirrors the server 409). */
export function beginSend(state: UiSessionState): UiSessionState | null {
  const text = state.draft.trim();
  if (!text || state.busy) {
    return null;
  }
  return {
    ...state,
    busy: true,
    banner: null,
    messages: [...state.messages, { from: "you", text }],
  };
}

export function completeSend(
  state: UiSessionState,
  reply: string,
  traceId: string,
  trace: TracePayload | null,
): UiSessionState {
  const traces = trace ? { ...state.traces, [traceId]: trace } : state.traces;
  return {
    ...state,
    busy: false,
    draft: "",
    messages: [...state.messages, { from: "bot", text: reply, traceId }],
    traces,
    selectedTraceId: traceId,
  };
}

/** Failure keeps the draft so the user can retry. */
export function failSend(state: UiSessionState, message: string): UiSessionState {
  return { ...state, busy: false, banner: message };
}

export function dismissBanner(state: UiSessionState): UiSessionState {
  return { ...state, banner: null };
}

export function selectTab(state: UiSessionState, tab: InspectorTab): UiSessionState {
  return { ...state, inspectorTab: tab };
}

export function selectTrace(state: UiSessionState, traceId: string): UiSessionState {
  if (!(traceId in state.traces)) {
    return state;
  }
  return { ...state, selectedTraceId: traceId, inspectorTab: "trace" };
}
