// @vitest-environment happy-dom

import { describe, expect, it } from "vitest";

import type { SessionResponse } from "../src/api.js";
import { buildViewTurns, fromSession } from "../src/state.js";
import { PendingGate, imageWithFallback, renderTranscript } from "../src/ui.js";

import fixture from "./fixtures/tumor_scenario.json";

const session = fixture.session as unknown as SessionResponse;

describe("transcript rendering", () => {
  function renderFixture(): HTMLElement {
    const container = document.createElement("main");
    renderTranscript(container, buildViewTurns(fromSession(session)));
    return container;
  }

  it("renders one chip for the tumor scenario", () => {
    const container = renderFixture();
    const chips = container.querySelectorAll(".chip");
    expect(chips).toHaveLength(1);
    expect(chips[0]!.textContent).toContain("VISTA3D(hepatic tumor)");
    expect((chips[0] as HTMLElement).dataset.argument).toBe("hepatic tumor");
  });

  it("renders the expert-feedback turn as a collapsed details element", () => {
    const container = renderFixture();
    const details = container.querySelector(".turn-expert-feedback details");
    expect(details).not.toBeNull();
    expect((details as HTMLDetailsElement).open).toBe(false);
    expect(details!.textContent).toContain("hepatic tumor");
  });

  it("renders the overlay image next to the original", () => {
    const container = renderFixture();
    const pair = container.querySelector(".overlay-pair");
    expect(pair).not.toBeNull();
    const images = pair!.querySelectorAll("img");
    expect(images).toHaveLength(2);
    expect(images[1]!.getAttribute("src")).toMatch(/overlay\.png$/);
  });

  it("re-rendering replaces rather than appends turns", () => {
    const container = document.createElement("main");
    const views = buildViewTurns(fromSession(session));
    renderTranscript(container, views);
    renderTranscript(container, views);
    expect(container.querySelectorAll("article")).toHaveLength(views.length);
  });
});

describe("broken image fallback", () => {
  it("swaps to an explicit unavailable marker on error", () => {
    const node = imageWithFallback("http://nowhere/overlay.png", "overlay-image");
    const img = node.querySelector("img")!;
    img.dispatchEvent(new Event("error"));
    expect(node.querySelector("img")).toBeNull();
    expect(node.querySelector(".broken-image")!.textContent).toContain("image unavailable");
  });
});

describe("pending gate (one in-flight turn)", () => {
  it("disables send while pending and rejects concurrent sends", async () => {
    const button = { disabled: false };
    const gate = new PendingGate(button);
    let release!: () => void;
    const first = gate.run(
      () =>
        new Promise<void>((resolve) => {
          release = resolve;
        }),
    );
    expect(button.disabled).toBe(true);
    expect(gate.isPending).toBe(true);
    await expect(gate.run(async () => undefined)).rejects.toThrow(/already in flight/);
    release();
    await first;
    expect(button.disabled).toBe(false);
    expect(gate.isPending).toBe(false);
  });

  it("re-enables the button when the action fails", async () => {
    const button = { disabled: false };
    const gate = new PendingGate(button);
    await expect(
      gate.run(async () => {
        throw new Error("gateway down");
      }),
    ).rejects.toThrow("gateway down");
    expect(button.disabled).toBe(false);
  });
});
