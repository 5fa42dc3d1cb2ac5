// Orchestrates one send: POST the message, fetch and cache its trace.

import { ApiClient, ApiError } from "./api.js";
import { UiSessionState, beginSend, completeSend, failSend } from "./state.js";

export async function submitMessage(
  state: UiSessionState,
  api: ApiClient,
): Promise<UiSessionState> {
  const started = beginSend(state);
  if (started === null) {
    return state;
  }
  try {
    const reply = await api.sendMessage(started.userId, started.draft.trim());
    let trace = null;
    try {
      trace = await api.getTrace(started.userId, reply.trace_id);
    } catch {
      // trace fetch is best-effort; the reply already rendered
    }
    return completeSend(started, reply.reply, reply.trace_id, trace);
  } catch (err) {
    if (err instanceof ApiError) {
      const retryable = err.status === 0 || err.status === 409 || err.status >= 500;
      const label = retryable ? "retryable" : `HTTP ${err.status}`;
      return failSend(started, `send failed (${label}): ${err.message}`);
    }
    return failSend(started, `send failed: ${String(err)}`);
  }
}
