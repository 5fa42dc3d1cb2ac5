// Pure HTML renderers. Every number and label comes from a server payload
// field; these functions add markup only.

import type {
  MemoriesPayload,
  ProfilePayload,
  SummaryPayload,
  TracePayload,
} from "./api.js";
import type { ChatMessage, UiSessionState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderMessage(message: ChatMessage, traces: Record<string, TracePayload>): string {
  const cls = message.from === "you" ? "msg msg-you" : "msg msg-bot";
  let badge = "";
  if (message.traceId) {
    const trace = traces[message.traceId];
    const route = trace?.route?.route ?? "?";
    badge = ` <button class="trace-badge" data-trace-id="${escapeHtml(message.traceId)}">${escapeHtml(route)}</button>`;
  }
  return `<div class="${cls}"><span class="msg-text">${escapeHtml(message.text)}</span>${badge}</div>`;
}

export function renderMessages(state: UiSessionState): string {
  return state.messages.map((m) => renderMessage(m, state.traces)).join("\n");
}

export function renderBanner(banner: string | null): string {
  if (!banner) {
    return "";
  }
  return `<div class="banner" role="alert">${escapeHtml(banner)} <button id="banner-dismiss">dismiss</button></div>`;
}

// Trace stages rendered in workflow order.
export function renderTrace(trace: TracePayload | null): string {
  if (!trace) {
    return `<p class="empty">No trace selected — send a message first.</p>`;
  }
  const parts: string[] = [`<h3>trace ${escapeHtml(trace.trace_id)}</h3>`];

  const route = trace.route;
  parts.push(
    `<details open class="stage stage-coordinator"><summary>Coordinator</summary>` +
      (route
        ? `<p>route: <strong class="route">${escapeHtml(route.route)}</strong> — ${escapeHtml(route.reason)}</p>`
        : `<p class="empty">skipped</p>`) +
      `</details>`,
  );

  const tools = trace.tool_calls
    .map(
      (t) =>
        `<li class="tool-call"><code>${escapeHtml(t.tool)}</code> ` +
        `<span class="digest">${escapeHtml(t.result_digest)}</span> ` +
        `<span class="ms">${t.duration_ms}ms</span></li>`,
    )
    .join("");
  parts.push(
    `<details open class="stage stage-operator"><summary>Operator</summary>` +
      (tools ? `<ul>${tools}</ul>` : `<p class="empty">no tool calls (direct route)</p>`) +
      `</details>`,
  );

  const rounds = trace.verdicts
    .map(
      (v) =>
        `<li class="validator-round" data-round="${v.round}">round ${v.round}: ` +
        `<strong>${escapeHtml(v.verdict)}</strong>` +
        (v.missing.length ? ` — ${escapeHtml(v.missing.join("; "))}` : "") +
        `</li>`,
    )
    .join("");
  parts.push(
    `<details open class="stage stage-validator"><summary>Self-Validator</summary>` +
      (rounds ? `<ul>${rounds}</ul>` : `<p class="empty">no validation rounds</p>`) +
      `</details>`,
  );

  parts.push(
    `<details open class="stage stage-responder"><summary>Response Generator</summary>` +
      `<p class="response">${escapeHtml(trace.response)}</p></details>`,
  );

  if (trace.warnings.length) {
    parts.push(`<p class="warnings">warnings: ${escapeHtml(trace.warnings.join(" | "))}</p>`);
  }
  return parts.join("\n");
}

export function renderMemories(view: MemoriesPayload | null): string {
  if (!view || view.records.length === 0) {
    return `<p class="empty">no memories</p>`;
  }
  const items = view.records
    .map((record) => {
      const score = record.score !== undefined ? `<span class="score">${record.score.toFixed(3)}</span> ` : "";
      const chips = record.related
        .map((id) => `<span class="chip related-chip">#${id}</span>`)
        .join(" ");
      return (
        `<li class="memory" data-memory-id="${record.memory_id}">` +
        `${score}<span class="memory-text">${escapeHtml(record.text)}</span> ` +
        `<span class="tags">[${record.tags.map(escapeHtml).join(", ")}]</span> ` +
        `<span class="related">${chips}</span></li>`
      );
    })
    .join("\n");
  const probe = view.probe ? `<p class="probe-tags">probe tags: ${(view.tags ?? []).map(escapeHtml).join(", ") || "-"}</p>` : "";
  return `${probe}<ol class="memories">${items}</ol>`;
}

export function renderProfile(profile: ProfilePayload | null): string {
  if (!profile) {
    return `<p class="empty">profile not loaded</p>`;
  }
  const sections = Object.entries(profile.categories)
    .map(([category, facts]) => {
      const body = facts.length
        ? `<ul>${facts.map((f) => `<li>${escapeHtml(f.text)}</li>`).join("")}</ul>`
        : `<p class="empty">(empty)</p>`;
      return `<section class="profile-category" data-category="${escapeHtml(category)}"><h4>${escapeHtml(category)}</h4>${body}</section>`;
    })
    .join("\n");
  return `<p class="profile-version">version ${profile.version}</p>\n${sections}`;
}

export function renderSummaries(summaries: SummaryPayload[]): string {
  if (summaries.length === 0) {
    return `<p class="empty">no summaries yet</p>`;
  }
  const items = summaries
    .map(
      (s) =>
        `<li class="summary">turns ${s.covers_turns[0]}–${s.covers_turns[1]} ` +
        `<span class="topics">[${s.topics.map(escapeHtml).join(", ")}]</span> ` +
        `${escapeHtml(s.text)}</li>`,
    )
    .join("\n");
  return `<ol class="summaries">${items}</ol>`;
}
