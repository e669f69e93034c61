/**
 * DOM rendering for a live campaign: posterior mean/CI, stability score and
 * acquisition panels (1-D sessions), the suggestion/entry form with keyboard
 * flow, the trace table and the running recommendation.  Sessions in two or
 * more dimensions fall back to the trace table and per-point score list.
 */

import { ApiClient } from "./api";
import { CampaignController, ControllerState } from "./controller";
import { bandPath, linePath, linearScale, normalisedToMax, paddedRange } from "./charts";
import type { AcqProfile, SessionView } from "./types";

const VIEW = { width: 640, height: 220, padding: 34 };

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function svgPanel(
  title: string,
  paths: { d: string; stroke?: string; fill?: string; width?: string }[],
  markers: { x: number; y: number; color: string }[],
): HTMLElement {
  const wrap = el("section", { class: "panel" });
  wrap.appendChild(el("h3", {}, title));
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${VIEW.width} ${VIEW.height}`);
  svg.setAttribute("class", "chart");
  for (const p of paths) {
    if (!p.d) continue;
    const path = document.createElementNS("http://www.w3.org/2000/svg", "path");
    path.setAttribute("d", p.d);
    path.setAttribute("fill", p.fill ?? "none");
    path.setAttribute("stroke", p.stroke ?? "none");
    path.setAttribute("stroke-width", p.width ?? "1.5");
    svg.appendChild(path);
  }
  for (const m of markers) {
    const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    dot.setAttribute("cx", String(m.x));
    dot.setAttribute("cy", String(m.y));
    dot.setAttribute("r", "3.5");
    dot.setAttribute("fill", m.color);
    svg.appendChild(dot);
  }
  wrap.appendChild(svg);
  return wrap;
}

function renderCharts(root: HTMLElement, session: SessionView, profile: AcqProfile): void {
  const [lo, hi] = session.config.bounds[0];
  const sx = linearScale(lo, hi, VIEW.padding, VIEW.width - VIEW.padding);
  const obsY = session.trace.map((r) => r.y);
  const meanRange = paddedRange([
    ...profile.mean.map((m, i) => m + 2 * profile.sd[i]),
    ...profile.mean.map((m, i) => m - 2 * profile.sd[i]),
    ...obsY,
  ]);
  const syMean = linearScale(meanRange[0], meanRange[1], VIEW.height - VIEW.padding, VIEW.padding);
  const suggested = session.pending?.[0] ?? null;

  const meanMarkers = session.trace.map((r) => ({
    x: sx.toPx(r.x[0]),
    y: syMean.toPx(r.y),
    color: r.manual_override ? "#c77" : "#369",
  }));
  if (suggested !== null) {
    meanMarkers.push({ x: sx.toPx(suggested), y: VIEW.height - VIEW.padding, color: "#e6a100" });
  }
  root.appendChild(
    svgPanel(
      "posterior mean ± 2σ",
      [
        { d: bandPath(profile.x, profile.mean, profile.sd, 2, sx, syMean), fill: "#cfe0f5" },
        { d: linePath(profile.x, profile.mean, sx, syMean), stroke: "#369" },
      ],
      meanMarkers,
    ),
  );
  const syUnit = linearScale(0, 1, VIEW.height - VIEW.padding, VIEW.padding);
  const scoreMarkers =
    suggested === null ? [] : [{ x: sx.toPx(suggested), y: VIEW.height - VIEW.padding, color: "#e6a100" }];
  root.appendChild(
    svgPanel(
      "stability score",
      [{ d: linePath(profile.x, profile.score, sx, syUnit), stroke: "#2a7" }],
      scoreMarkers,
    ),
  );
  root.appendChild(
    svgPanel(
      "acquisition (display-normalised)",
      [{ d: linePath(profile.x, normalisedToMax(profile.acq), sx, syUnit), stroke: "#a36" }],
      scoreMarkers,
    ),
  );
}

function renderTrace(root: HTMLElement, session: SessionView): void {
  const section = el("section", { class: "panel" });
  section.appendChild(el("h3", {}, `observations (${session.trace.length})`));
  const table = el("table", { class: "trace" });
  const head = el("tr");
  for (const col of ["#", "x", "y", "score", "manual"]) head.appendChild(el("th", {}, col));
  table.appendChild(head);
  for (const row of session.trace) {
    const tr = el("tr");
    tr.appendChild(el("td", {}, String(row.iteration)));
    tr.appendChild(el("td", {}, row.x.map((v) => v.toPrecision(6)).join(", ")));
    tr.appendChild(el("td", {}, row.y.toPrecision(6)));
    tr.appendChild(el("td", {}, row.score === null ? "—" : row.score.toFixed(3)));
    tr.appendChild(el("td", {}, row.manual_override ? "yes" : ""));
    table.appendChild(tr);
  }
  section.appendChild(table);
  root.appendChild(section);
}

function renderRecommendation(root: HTMLElement, session: SessionView): void {
  if (!session.recommendation) return;
  const rec = session.recommendation;
  const section = el("section", { class: "panel" });
  section.appendChild(el("h3", {}, "recommendation"));
  section.appendChild(
    el(
      "p",
      {},
      `x* = ${rec.x_star.map((v) => v.toPrecision(6)).join(", ")} · stable gain ${rec.stable_gain.toPrecision(4)}`,
    ),
  );
  const list = el("ul", { class: "per-point" });
  for (const p of rec.per_point) {
    list.appendChild(
      el(
        "li",
        {},
        `x=${p.x.map((v) => v.toPrecision(4)).join(",")} y=${p.y.toPrecision(4)} score=${p.score.toFixed(3)}`,
      ),
    );
  }
  section.appendChild(list);
  root.appendChild(section);
}

/** Mount the dashboard for one session; returns the controller for tests. */
export function mountDashboard(
  host: HTMLElement,
  api: ApiClient,
  sessionId: string,
  onGone: () => void,
): CampaignController {
  let lastProfile: AcqProfile | null = null;

  const render = (state: ControllerState): void => {
    host.textContent = "";
    if (state.phase === "disconnected") {
      host.appendChild(el("div", { class: "banner error", role: "alert" }, "connection lost — retrying"));
    }
    if (state.warning) {
      host.appendChild(el("div", { class: "banner warn", role: "alert" }, state.warning));
    }
    const session = state.session;
    if (!session) {
      host.appendChild(el("p", {}, "loading session…"));
      return;
    }

    const form = el("form", { class: "entry" });
    const suggestBtn = el("button", { type: "button", id: "suggest" }, "suggest next experiment");
    suggestBtn.addEventListener("click", () => void controller.requestSuggestion());
    form.appendChild(suggestBtn);
    if (state.suggestion) {
      form.appendChild(
        el("label", { for: "y-input" }, `measured outcome at x = ${state.suggestion.x.map((v) => v.toPrecision(6)).join(", ")}`),
      );
      const input = el("input", { id: "y-input", type: "text", inputmode: "decimal", autofocus: "autofocus" });
      form.appendChild(input);
      form.appendChild(el("button", { type: "submit" }, "submit observation"));
      form.addEventListener("submit", (event) => {
        event.preventDefault();
        void controller.submitObservation(input.value).then((ok) => {
          if (ok) void controller.requestSuggestion();
        });
      });
    }
    host.appendChild(form);

    const dim = session.config.bounds.length;
    if (dim === 1 && lastProfile) {
      renderCharts(host, session, lastProfile);
    } else if (dim > 1) {
      host.appendChild(el("p", { class: "note" }, "multi-dimensional session: chart panels are replaced by the tables below"));
    }
    renderTrace(host, session);
    renderRecommendation(host, session);

    const exportLink = el("a", { href: api.traceCsvUrl(sessionId), download: "trace.csv" }, "export trace.csv");
    host.appendChild(exportLink);
  };

  const controller = new CampaignController(api, sessionId, (state) => {
    const profile = state.suggestion?.acq_profile;
    if (profile) lastProfile = profile;
    render(state);
  });
  void controller.refresh().catch((err) => {
    if (err && typeof err === "object" && "status" in err && (err as { status: number }).status === 404) {
      onGone();
    }
  });
  controller.startPolling(1000);
  return controller;
}
