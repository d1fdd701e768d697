/**
 * main.ts - wiring: session picker, 2-second polling, keyboard labeling.
 *
 * Keys: digits 0..C−1 label the highlighted card, arrow keys move the
 * highlight, "g" flips between focus and grid view. Everything shown is
 * refetched from the service, so a reload lands on the same view.
 */

import { HttpApi } from "./api.js";
import { render } from "./render.js";
import type { Handlers, Mode, UiOptions } from "./render.js";
import { SessionStore } from "./store.js";

const POLL_MS = 2000;

function sessionIdFromUrl(): string | null {
  return new URLSearchParams(window.location.search).get("session");
}

function picker(root: HTMLElement): void {
  root.textContent = "";
  const box = document.createElement("div");
  box.className = "picker";
  const title = document.createElement("h1");
  title.textContent = "annotation queue";
  const input = document.createElement("input");
  input.placeholder = "session id";
  const go = document.createElement("button");
  go.textContent = "open";
  go.addEventListener("click", () => {
    if (input.value.trim()) {
      window.location.search = `?session=${encodeURIComponent(input.value.trim())}`;
    }
  });
  input.addEventListener("keydown", (e) => {
    if (e.key === "Enter") {
      go.click();
    }
  });
  box.append(title, input, go);
  root.appendChild(box);
  input.focus();
}

function start(root: HTMLElement, sessionId: string): void {
  const store = new SessionStore(new HttpApi(), sessionId);
  const ui: UiOptions = { mode: "focus" as Mode, activeIndex: 0 };

  const repaint = () => render(root, store.view, ui, handlers);
  const handlers: Handlers = {
    onLabel: (sampleId, label) => {
      void store.submitLabel(sampleId, label);
    },
    onToggleMode: () => {
      ui.mode = ui.mode === "focus" ? "grid" : "focus";
      repaint();
    },
    onActivate: (index) => {
      ui.activeIndex = index;
      repaint();
    },
  };

  store.subscribe(() => {
    const count = store.view.items.length;
    if (ui.activeIndex >= count) {
      ui.activeIndex = Math.max(0, count - 1);
    }
    repaint();
  });

  window.addEventListener("keydown", (event) => {
    const items = store.view.items;
    if (items.length === 0) {
      return;
    }
    const active = items[Math.min(ui.activeIndex, items.length - 1)];
    if (/^[0-9]$/.test(event.key)) {
      const label = Number(event.key);
      if (label < active.class_count) {
        void store.submitLabel(active.sample_id, label);
      }
    } else if (event.key === "ArrowRight" || event.key === "ArrowDown") {
      handlers.onActivate(Math.min(ui.activeIndex + 1, items.length - 1));
      event.preventDefault();
    } else if (event.key === "ArrowLeft" || event.key === "ArrowUp") {
      handlers.onActivate(Math.max(ui.activeIndex - 1, 0));
      event.preventDefault();
    } else if (event.key === "g") {
      handlers.onToggleMode();
    }
  });

  void store.refresh();
  window.setInterval(() => void store.refresh(), POLL_MS);
}

const root = document.getElementById("app");
if (root !== null) {
  const sessionId = sessionIdFromUrl();
  if (sessionId === null) {
    picker(root);
  } else {
    start(root, sessionId);
  }
}
