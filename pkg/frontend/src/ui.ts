/** DOM rendering for the console. No framework: every element is built
 * from the view model, and re-renders replace the transcript wholesale so
 * the screen always equals the state. */

import type { TriggerChip, ViewTurn } from "./state.js";

const ROLE_LABELS: Record<string, string> = {
  system: "system",
  user: "you",
  assistant: "model",
  "expert-feedback": "expert feedback",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Images that fail to load swap to an explicit broken-image marker
 * rather than disappearing. */
export function imageWithFallback(src: string, className: string): HTMLElement {
  const wrapper = el("span", `${className}-wrap`);
  const img = el("img", className) as HTMLImageElement;
  img.src = src;
  img.alt = src;
  img.addEventListener("error", () => {
    const broken = el("span", "broken-image", `image unavailable: ${src}`);
    wrapper.replaceChildren(broken);
  });
  wrapper.appendChild(img);
  return wrapper;
}

export function renderChip(chip: TriggerChip): HTMLElement {
  const node = el("span", `chip chip-${chip.status}`);
  const label = `${chip.keyword}(${chip.argument})`;
  node.appendChild(el("span", "chip-label", label));
  if (chip.status === "ok" && chip.latencyMs !== null) {
    node.appendChild(el("span", "chip-latency", `${chip.latencyMs.toFixed(1)} ms`));
  }
  if (chip.status === "error" && chip.errorMessage) {
    node.title = chip.errorMessage;
    node.appendChild(el("span", "chip-error", "failed"));
  }
  node.dataset.keyword = chip.keyword;
  node.dataset.argument = chip.argument;
  return node;
}

export function renderTurn(view: ViewTurn): HTMLElement {
  const node = el("article", `turn turn-${view.role}`);
  node.appendChild(el("span", "role-badge", ROLE_LABELS[view.role] ?? view.role));

  const chipRow = el("div", "chip-row");
  for (const chip of view.chips) {
    chipRow.appendChild(renderChip(chip));
  }
  if (view.chips.length > 0) node.appendChild(chipRow);

  if (view.collapsed) {
    const details = el("details", "feedback-details");
    details.appendChild(el("summary", "feedback-summary", "expert feedback"));
    details.appendChild(el("pre", "turn-text", view.text));
    node.appendChild(details);
  } else if (view.text) {
    node.appendChild(el("pre", "turn-text", view.text));
  }

  if (view.overlayPair) {
    const pair = el("div", "overlay-pair");
    if (view.overlayPair.original) {
      pair.appendChild(imageWithFallback(view.overlayPair.original, "overlay-original"));
    }
    pair.appendChild(imageWithFallback(view.overlayPair.overlay, "overlay-image"));
    node.appendChild(pair);
  } else {
    for (const uri of view.images) {
      if (view.role !== "expert-feedback") {
        node.appendChild(imageWithFallback(uri, "turn-image"));
      }
    }
  }
  return node;
}

export function renderTranscript(container: HTMLElement, views: ViewTurn[]): void {
  container.replaceChildren(...views.map(renderTurn));
  container.scrollTop = container.scrollHeight;
}

export function showToast(container: HTMLElement, message: string): void {
  const toast = el("div", "toast", message);
  container.appendChild(toast);
  setTimeout(() => toast.remove(), 6000);
}

/** Enforces one in-flight turn per session: `run` rejects while a prior
 * send is pending and toggles the send control. */
export class PendingGate {
  private pending = false;

  constructor(private readonly sendButton: { disabled: boolean }) {}

  get isPending(): boolean {
    return this.pending;
  }

  async run<T>(action: () => Promise<T>): Promise<T> {
    if (this.pending) {
      throw new Error("a turn is already in flight for this session");
    }
    this.pending = true;
    this.sendButton.disabled = true;
    try {
      return await action();
    } finally {
      this.pending = false;
      this.sendButton.disabled = false;
    }
  }
}
