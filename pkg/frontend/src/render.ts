/**
 * render.ts - DOM projection of the store state.
 *
 * Rebuilds the page sections on every state change; the scale (tens of
 * cards) never justifies a virtual DOM. Image payloads are raw
 * grayscale bytes rendered through ImageData; feature payloads get a
 * sparkline.
 */

import { drawChart } from "./chart.js";
import type { ViewState } from "./store.js";
import type { QueryItem } from "./types.js";

export type Mode = "focus" | "grid";

export interface Handlers {
  onLabel(sampleId: number, label: number): void;
  onToggleMode(): void;
  onActivate(index: number): void;
}

export interface UiOptions {
  mode: Mode;
  activeIndex: number;
}

const PHASE_TEXT: Record<string, string> = {
  SEEDING: "preparing the seed set",
  TRAINING: "retraining the committee",
  SCORING: "scoring the pool",
  AWAITING_LABELS: "awaiting labels",
  DONE: "session complete",
};

export function render(
  root: HTMLElement,
  state: ViewState,
  ui: UiOptions,
  handlers: Handlers,
): void {
  root.textContent = "";
  if (state.status === null) {
    root.appendChild(el("p", "hint", state.error ?? "loading session…"));
    return;
  }
  root.appendChild(header(state));
  if (state.error !== null) {
    root.appendChild(el("div", "banner error", state.error));
  } else if (state.stale) {
    root.appendChild(el("div", "banner stale", "connection lost, retrying…"));
  }
  root.appendChild(progress(state));
  root.appendChild(queue(state, ui, handlers));
}

function header(state: ViewState): HTMLElement {
  const status = state.status!;
  const box = el("header", "header");
  box.appendChild(el("h1", "", `session ${status.session_id}`));
  const phase = PHASE_TEXT[status.phase] ?? status.phase;
  box.appendChild(
    el(
      "div",
      `phase phase-${status.phase.toLowerCase()}`,
      `round ${Math.min(status.round, status.rounds)}/${status.rounds} - ${phase}` +
        (status.phase === "TRAINING" || status.phase === "SCORING" ? " ⟳" : ""),
    ),
  );
  box.appendChild(
    el("div", "meta", `${status.strategy} strategy, ${status.oracle} oracle`),
  );
  return box;
}

function progress(state: ViewState): HTMLElement {
  const status = state.status!;
  const box = el("section", "progress");

  const budget = status.budget;
  const labeled = el("div", "gauge-row");
  labeled.appendChild(
    el(
      "span",
      "",
      `labeled ${budget.distinct_labeled} of ${budget.train_cohort_size} ` +
        `(${budget.initially_labeled} seed + ${budget.queried_total} queried)`,
    ),
  );
  box.appendChild(labeled);

  const pct = Math.round(budget.savings_fraction * 100);
  const gauge = el("div", "gauge");
  gauge.title = `savings ${pct}%`;
  const fill = el("div", "gauge-fill");
  fill.style.width = `${pct}%`;
  fill.textContent = `${pct}% saved`;
  gauge.appendChild(fill);
  box.appendChild(gauge);

  const rounds = state.metrics?.rounds ?? [];
  const canvas = document.createElement("canvas");
  canvas.width = 460;
  canvas.height = 180;
  canvas.className = "chart";
  box.appendChild(canvas);
  drawChart(canvas, rounds);
  const legend = el(
    "div",
    "legend",
    rounds.length === 0 ? "no completed rounds yet" : "solid: validation AUC   dashed: test AUC",
  );
  box.appendChild(legend);
  return box;
}

function queue(state: ViewState, ui: UiOptions, handlers: Handlers): HTMLElement {
  const status = state.status!;
  const box = el("section", "queue");

  if (status.phase === "DONE") {
    const last = status.latest;
    const auc =
      last?.val_auc != null ? ` - final validation AUC ${last.val_auc.toFixed(4)}` : "";
    box.appendChild(el("div", "empty done", `all rounds complete${auc}`));
    return box;
  }
  if (state.items.length === 0) {
    box.appendChild(el("div", "empty", PHASE_TEXT[status.phase] ?? status.phase));
    return box;
  }

  const bar = el("div", "queue-bar");
  bar.appendChild(el("span", "", `${state.items.length} queued, most informative first`));
  const toggle = el("button", "toggle", ui.mode === "focus" ? "grid view" : "focus view");
  toggle.addEventListener("click", handlers.onToggleMode);
  bar.appendChild(toggle);
  box.appendChild(bar);

  const active = Math.min(ui.activeIndex, state.items.length - 1);
  if (ui.mode === "focus") {
    box.appendChild(card(state.items[active], true, handlers, active));
  } else {
    const grid = el("div", "grid");
    state.items.forEach((item, index) => {
      grid.appendChild(card(item, index === active, handlers, index));
    });
    box.appendChild(grid);
  }
  return box;
}

function card(
  item: QueryItem,
  active: boolean,
  handlers: Handlers,
  index: number,
): HTMLElement {
  const box = el("article", active ? "card active" : "card");
  box.addEventListener("click", () => handlers.onActivate(index));

  box.appendChild(payloadView(item));
  box.appendChild(
    el("div", "score", `rank ${item.rank} · score ${item.score.toFixed(3)}`),
  );
  box.appendChild(
    el(
      "div",
      "score-parts",
      `entropy ${item.entropy_sum.toFixed(3)} + disagreement ${item.kl_sum.toFixed(3)}`,
    ),
  );

  const buttons = el("div", "labels");
  item.class_names.forEach((name, label) => {
    const button = el("button", "label-btn", `${label} ${name}`);
    button.addEventListener("click", (event) => {
      event.stopPropagation();
      handlers.onLabel(item.sample_id, label);
    });
    buttons.appendChild(button);
  });
  box.appendChild(buttons);
  return box;
}

function payloadView(item: QueryItem): HTMLElement {
  const payload = item.payload;
  const canvas = document.createElement("canvas");
  canvas.className = "payload";
  const ctx = canvas.getContext("2d");
  if (payload.kind === "image") {
    canvas.width = payload.cols;
    canvas.height = payload.rows;
    if (ctx !== null) {
      const gray = decodeBase64(payload.data);
      const rgba = new Uint8ClampedArray(gray.length * 4);
      for (let i = 0; i < gray.length; i++) {
        rgba[4 * i] = rgba[4 * i + 1] = rgba[4 * i + 2] = gray[i];
        rgba[4 * i + 3] = 255;
      }
      ctx.putImageData(new ImageData(rgba, payload.cols, payload.rows), 0, 0);
    }
  } else {
    canvas.width = 120;
    canvas.height = 48;
    if (ctx !== null) {
      sparkline(ctx, payload.data, canvas.width, canvas.height);
    }
  }
  return canvas;
}

function sparkline(
  ctx: CanvasRenderingContext2D,
  values: number[],
  width: number,
  height: number,
): void {
  if (values.length === 0) {
    return;
  }
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  ctx.strokeStyle = "#2a4f6f";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = values.length === 1 ? width / 2 : (i / (values.length - 1)) * width;
    const y = height - ((v - lo) / span) * (height - 6) - 3;
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.stroke();
}

function decodeBase64(data: string): Uint8ClampedArray {
  const raw = atob(data);
  const bytes = new Uint8ClampedArray(raw.length);
  for (let i = 0; i < raw.length; i++) {
    bytes[i] = raw.charCodeAt(i);
  }
  return bytes;
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}
