/**
 * Entry point: service base-URL setting, session picker and a JSON paste box
 * for creating a campaign, then hands over to the dashboard.
 */

import { ApiClient, ApiError } from "./api";
import { mountDashboard } from "./dashboard";
import { CampaignController } from "./controller";

const DEFAULT_BASE = "http://127.0.0.1:8765";

function query(selector: string): HTMLElement {
  const node = document.querySelector(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node as HTMLElement;
}

async function renderPicker(api: ApiClient, host: HTMLElement, open: (id: string) => void): Promise<void> {
  host.textContent = "";
  host.appendChild(Object.assign(document.createElement("h3"), { textContent: "sessions" }));
  try {
    const sessions = await api.listSessions();
    const list = document.createElement("ul");
    for (const s of sessions) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = `#${s.id}`;
      link.textContent = `${s.id} — ${s.observations} observations${s.pending ? " (suggestion pending)" : ""}`;
      link.addEventListener("click", (event) => {
        event.preventDefault();
        open(s.id);
      });
      item.appendChild(link);
      list.appendChild(item);
    }
    host.appendChild(list);
  } catch {
    const note = document.createElement("p");
    note.className = "banner error";
    note.textContent = "service unreachable — check the base URL";
    host.appendChild(note);
  }

  const form = document.createElement("form");
  const label = document.createElement("label");
  label.textContent = "new campaign config (JSON)";
  label.setAttribute("for", "config-json");
  const area = document.createElement("textarea");
  area.id = "config-json";
  area.rows = 8;
  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "create session";
  form.append(label, area, submit);
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    try {
      const config = JSON.parse(area.value) as Record<string, unknown>;
      const created = await api.createSession(config);
      open(created.id);
    } catch (err) {
      alert(err instanceof ApiError ? err.detail : `invalid config: ${err}`);
    }
  });
  host.appendChild(form);
}

export function boot(): void {
  const baseInput = query("#base-url") as HTMLInputElement;
  baseInput.value = DEFAULT_BASE;
  const content = query("#content");
  let controller: CampaignController | null = null;

  const showPicker = (): void => {
    controller?.stopPolling();
    controller = null;
    const api = new ApiClient(baseInput.value);
    void renderPicker(api, content, showSession);
  };

  const showSession = (id: string): void => {
    controller?.stopPolling();
    const api = new ApiClient(baseInput.value);
    content.textContent = "";
    controller = mountDashboard(content, api, id, showPicker);
  };

  query("#home").addEventListener("click", (event) => {
    event.preventDefault();
    showPicker();
  });
  baseInput.addEventListener("change", showPicker);
  showPicker();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
