// DOM shell: wires the pure state/render modules to the page.

import { ApiClient } from "./api.js";
import { submitMessage } from "./controller.js";
import {
  InspectorTab,
  UiSessionState,
  dismissBanner,
  initialState,
  selectTab,
  selectTrace,
  setDraft,
} from "./state.js";
import {
  renderBanner,
  renderMemories,
  renderMessages,
  renderProfile,
  renderSummaries,
  renderTrace,
} from "./render.js";

const api = new ApiClient("");
let state: UiSessionState;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function refreshInspector(): Promise<void> {
  const tab = state.inspectorTab;
  const pane = el<HTMLDivElement>("inspector-pane");
  try {
    if (tab === "trace") {
      const trace = state.selectedTraceId ? state.traces[state.selectedTraceId] : null;
      pane.innerHTML = renderTrace(trace ?? null);
    } else if (tab === "memories") {
      const probe = el<HTMLInputElement>("probe-input").value.trim();
      const view = await api.getMemories(state.userId, probe || undefined, 15);
      pane.innerHTML = renderMemories(view);
    } else if (tab === "summaries") {
      const payload = await api.getSummaries(state.userId);
      pane.innerHTML = renderSummaries(payload.summaries);
    } else {
      const profile = await api.getProfile(state.userId);
      pane.innerHTML = renderProfile(profile);
    }
  } catch (err) {
    pane.innerHTML = `<p class="empty">could not load ${tab}: ${String(err)}</p>`;
  }
}

function redraw(): void {
  el<HTMLDivElement>("messages").innerHTML = renderMessages(state);
  el<HTMLDivElement>("banner-slot").innerHTML = renderBanner(state.banner);
  const input = el<HTMLInputElement>("chat-input");
  input.value = state.draft;
  input.disabled = state.busy;
  el<HTMLButtonElement>("send-button").disabled = state.busy;
  document.querySelectorAll<HTMLButtonElement>(".tab").forEach((button) => {
    button.classList.toggle("active", button.dataset.tab === state.inspectorTab);
  });
  const log = el<HTMLDivElement>("messages");
  log.scrollTop = log.scrollHeight;
  const dismiss = document.getElementById("banner-dismiss");
  if (dismiss) {
    dismiss.addEventListener("click", () => {
      state = dismissBanner(state);
      redraw();
    });
  }
  document.querySelectorAll<HTMLButtonElement>(".trace-badge").forEach((badge) => {
    badge.addEventListener("click", () => {
      state = selectTrace(state, badge.dataset.traceId ?? "");
      redraw();
      void refreshInspector();
    });
  });
}

async function onSend(): Promise<void> {
  state = setDraft(state, el<HTMLInputElement>("chat-input").value);
  const next = await submitMessage(state, api);
  if (next === state) {
    return; // empty draft or busy
  }
  state = next;
  redraw();
  void refreshInspector();
}

function init(): void {
  const params = new URLSearchParams(window.location.search);
  state = initialState(params.get("user") ?? "demo");
  el<HTMLSpanElement>("user-label").textContent = state.userId;

  el<HTMLButtonElement>("send-button").addEventListener("click", () => void onSend());
  el<HTMLInputElement>("chat-input").addEventListener("keydown", (event) => {
    if (event.key === "Enter") void onSend();
  });
  el<HTMLInputElement>("chat-input").addEventListener("input", (event) => {
    state = setDraft(state, (event.target as HTMLInputElement).value);
  });
  document.querySelectorAll<HTMLButtonElement>(".tab").forEach((button) => {
    button.addEventListener("click", () => {
      state = selectTab(state, button.dataset.tab as InspectorTab);
      redraw();
      void refreshInspector();
    });
  });
  el<HTMLButtonElement>("probe-button").addEventListener("click", () => {
    state = selectTab(state, "memories");
    redraw();
    void refreshInspector();
  });

  redraw();
  void refreshInspector();
}

document.addEventListener("DOMContentLoaded", init);
