// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { renderPosterior, renderQueryError } from "../src/bars.js";
import type { DistributionDoc, ErrorBody } from "../src/types.js";
import { loadFixture } from "./fixtures.js";

function host(): HTMLElement {
  const el = document.createElement("div");
  document.body.appendChild(el);
  return el;
}

describe("posterior bars", () => {
  it("renders fixture probabilities exactly (no client-side math)", () => {
    const fixture = loadFixture<DistributionDoc>("query_exact.json");
    const container = host();
    renderPosterior(container, fixture);
    const rows = [...container.querySelectorAll(".posterior-row")];
    expect(rows).toHaveLength(Object.keys(fixture.probabilities).length);
    for (const row of rows) {
      const state = row.getAttribute("data-state")!;
      expect(row.getAttribute("data-prob")).toBe(String(fixture.probabilities[state]));
    }
  });

  it("approximate results carry one error bar per state", () => {
    const fixture = loadFixture<DistributionDoc>("query_approx.json");
    const container = host();
    renderPosterior(container, fixture);
    const whiskers = [...container.querySelectorAll(".error-bar")];
    expect(whiskers).toHaveLength(Object.keys(fixture.probabilities).length);
    for (const w of whiskers) {
      const state = w.closest(".posterior-row")!.getAttribute("data-state")!;
      expect(w.getAttribute("data-stderr")).toBe(String(fixture.std_error![state]));
    }
    expect(fixture.meta.repeats).toBe(25);
  });

  it("exact results carry no error bars", () => {
    const fixture = loadFixture<DistributionDoc>("query_exact.json");
    const container = host();
    renderPosterior(container, fixture);
    expect(container.querySelectorAll(".error-bar")).toHaveLength(0);
  });

  it("evidence on the query variable renders a single full bar", () => {
    const fixture = loadFixture<DistributionDoc>("query_point_mass.json");
    const container = host();
    renderPosterior(container, fixture);
    const probs = [...container.querySelectorAll(".posterior-row")].map((row) =>
      Number(row.getAttribute("data-prob")),
    );
    expect(probs.filter((p) => p === 1.0)).toHaveLength(1);
    expect(probs.filter((p) => p === 0.0)).toHaveLength(probs.length - 1);
  });

  it("impossible evidence renders an inline explanation and flags the chip", () => {
    const body = loadFixture<ErrorBody>("error_impossible.json");
    const container = host();
    const chip = document.createElement("button");
    renderQueryError(container, body, chip);
    const note = container.querySelector(".query-error")!;
    expect(note.getAttribute("data-code")).toBe("impossible_evidence");
    expect(note.textContent).toContain("probability 0");
    expect(chip.classList.contains("evidence-conflict")).toBe(true);
  });
});
