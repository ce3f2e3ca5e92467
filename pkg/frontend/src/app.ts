// DOM wiring for the three panels. All state lives in the session/browser
// objects; this file only moves it in and out of the page.

import { ApiClient } from "./api.js";
import { ChatSession } from "./chat.js";
import { SkillBrowser } from "./skills.js";
import { evolutionRows, injectionSummary, rewriteLabel, scoreTable } from "./traces.js";
import type { Trace } from "./types.js";

const POLL_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function userIdFromPage(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("user") || "default";
}

export function startApp(): void {
  const api = new ApiClient(window.location.origin, userIdFromPage());
  const session = new ChatSession(api);
  const browser = new SkillBrowser(api);
  let eta = 0.35;
  let selectedTraceId: number | null = null;

  void api.getConfig().then((cfg) => {
    if (cfg.ok) eta = cfg.value.weights.eta;
  });

  const transcriptEl = el<HTMLDivElement>("transcript");
  const chatError = el<HTMLDivElement>("chat-error");
  const input = el<HTMLInputElement>("chat-input");
  const sendBtn = el<HTMLButtonElement>("chat-send");
  const retryBtn = el<HTMLButtonElement>("chat-retry");
  const skillList = el<HTMLUListElement>("skill-list");
  const editorEl = el<HTMLDivElement>("editor");
  const traceEl = el<HTMLDivElement>("trace");

  function renderTranscript(): void {
    transcriptEl.replaceChildren(
      ...session.transcript.map((entry) => {
        const div = document.createElement("div");
        div.className = `msg msg-${entry.message.role}`;
        div.textContent = `${entry.message.role}: ${entry.message.content}`;
        if (entry.traceId !== null) {
          const link = document.createElement("a");
          link.href = "#";
          link.textContent = ` [trace ${entry.traceId}]`;
          link.onclick = (ev) => {
            ev.preventDefault();
            selectedTraceId = entry.traceId;
            void renderTrace();
          };
          div.appendChild(link);
        }
        return div;
      }),
    );
    if (session.pendingError) {
      chatError.textContent = session.pendingError.message;
      retryBtn.hidden = false;
    } else {
      chatError.textContent = "";
      retryBtn.hidden = true;
    }
  }

  async function renderTrace(): Promise<void> {
    if (selectedTraceId === null) return;
    const result = await api.getTraces();
    if (!result.ok) {
      traceEl.textContent = result.error.message;
      return;
    }
    const trace = result.value.traces.find((t: Trace) => t.trace_id === selectedTraceId);
    if (!trace) {
      traceEl.textContent = "trace evicted";
      return;
    }
    const lines: string[] = [
      `query: ${trace.query}`,
      `search query: ${rewriteLabel(trace)}`,
      injectionSummary(trace),
      "",
      "name  version  d^  b^  rel",
    ];
    for (const row of scoreTable(trace, eta)) {
      const marks = [row.injected ? "injected" : "", row.belowEta ? "below η" : ""]
        .filter(Boolean)
        .join(", ");
      lines.push(
        `${row.name}  v${row.version}  ${row.dense}  ${row.lexical}  ${row.rel}` +
          (marks ? `  (${marks})` : ""),
      );
    }
    const evo = evolutionRows(trace);
    if (evo.length) {
      lines.push("", "evolution:", ...evo);
    }
    if (trace.context) {
      lines.push("", "injected context:", trace.context);
    }
    traceEl.textContent = lines.join("\n");
  }

  function renderSkills(): void {
    skillList.replaceChildren(
      ...browser.skills.map((skill) => {
        const li = document.createElement("li");
        li.textContent = `${skill.name} v${skill.version} [${skill.scope}] ${skill.tags.join(", ")}`;
        li.onclick = () => {
          void browser.open(skill.id).then(() => renderEditor());
        };
        return li;
      }),
    );
  }

  function renderEditor(): void {
    const state = browser.editor;
    if (!state) {
      editorEl.replaceChildren();
      return;
    }
    editorEl.replaceChildren();
    const title = document.createElement("h3");
    title.textContent = `${state.skill.name} v${state.skill.version}`;
    editorEl.appendChild(title);

    const fields: ("name" | "description" | "prompt")[] = ["name", "description", "prompt"];
    for (const field of fields) {
      const label = document.createElement("label");
      label.textContent = field;
      const area = document.createElement("textarea");
      area.value = (state.draft[field] as string | undefined) ?? state.skill[field];
      area.oninput = () => browser.edit(field, area.value);
      label.appendChild(area);
      const err = state.fieldErrors[field];
      if (err) {
        const msg = document.createElement("span");
        msg.className = "field-error";
        msg.textContent = err;
        label.appendChild(msg);
      }
      editorEl.appendChild(label);
    }
    const listFields: ("triggers" | "tags" | "examples")[] = ["triggers", "tags", "examples"];
    for (const field of listFields) {
      const label = document.createElement("label");
      label.textContent = `${field} (one per line)`;
      const area = document.createElement("textarea");
      const current = (state.draft[field] as string[] | undefined) ?? state.skill[field];
      area.value = current.join("\n");
      area.oninput = () => browser.edit(field, area.value.split("\n").filter((s) => s.length > 0));
      label.appendChild(area);
      const err = state.fieldErrors[field];
      if (err) {
        const msg = document.createElement("span");
        msg.className = "field-error";
        msg.textContent = err;
        label.appendChild(msg);
      }
      editorEl.appendChild(label);
    }
    const generalErr = state.fieldErrors.general;
    if (generalErr) {
      const msg = document.createElement("div");
      msg.className = "field-error";
      msg.textContent = generalErr;
      editorEl.appendChild(msg);
    }
    const save = document.createElement("button");
    save.textContent = "save";
    save.onclick = () => {
      void browser.save().then(() => {
        renderEditor();
        renderSkills();
      });
    };
    editorEl.appendChild(save);
    const del = document.createElement("button");
    del.textContent = "delete";
    del.onclick = () => {
      void browser.remove(state.skill.id).then(() => {
        renderEditor();
        renderSkills();
      });
    };
    editorEl.appendChild(del);
  }

  sendBtn.onclick = () => {
    const text = input.value.trim();
    if (!text) return;
    input.value = "";
    void session.send(text).then(() => renderTranscript());
  };
  retryBtn.onclick = () => {
    void session.retry().then(() => renderTranscript());
  };

  void browser.refresh().then(() => renderSkills());
  window.setInterval(() => {
    void renderTrace();
    void browser.refresh().then(() => renderSkills());
  }, POLL_MS);

  renderTranscript();
}

if (typeof document !== "undefined" && document.getElementById("transcript")) {
  startApp();
}
