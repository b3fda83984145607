/** Posterior bar charts. Numbers come straight from the service response;
 * the only client-side arithmetic is percent formatting for display. */

import type { DistributionDoc, ErrorBody } from "./types.js";

export function formatProbability(p: number): string {
  return p.toFixed(3);
}

export function renderPosterior(container: HTMLElement, dist: DistributionDoc): void {
  const doc = container.ownerDocument;
  const panel = doc.createElement("div");
  panel.className = "posterior-panel";
  panel.setAttribute("data-variable", dist.variable);
  panel.setAttribute("data-method", dist.method);

  const heading = doc.createElement("h3");
  heading.textContent = `P(${dist.variable}) — ${dist.method}`;
  panel.appendChild(heading);

  for (const [state, p] of Object.entries(dist.probabilities)) {
    const row = doc.createElement("div");
    row.className = "posterior-row";
    row.setAttribute("data-state", state);
    row.setAttribute("data-prob", String(p));

    const label = doc.createElement("span");
    label.className = "state-label";
    label.textContent = state;
    row.appendChild(label);

    const track = doc.createElement("div");
    track.className = "bar-track";
    const bar = doc.createElement("div");
    bar.className = "bar-fill";
    bar.style.width = `${(p * 100).toFixed(1)}%`;
    track.appendChild(bar);

    const stderr = dist.std_error?.[state];
    if (stderr !== undefined) {
      const whisker = doc.createElement("span");
      whisker.className = "error-bar";
      whisker.setAttribute("data-stderr", String(stderr));
      whisker.textContent = `±${stderr.toFixed(3)}`;
      track.appendChild(whisker);
    }
    row.appendChild(track);

    const value = doc.createElement("span");
    value.className = "prob-value";
    value.textContent = formatProbability(p);
    row.appendChild(value);

    panel.appendChild(row);
  }
  container.replaceChildren(panel);
}

/** Inline explanation for a failed query (e.g. impossible evidence). */
export function renderQueryError(
  container: HTMLElement,
  body: ErrorBody,
  highlightChip?: HTMLElement,
): void {
  const doc = container.ownerDocument;
  const note = doc.createElement("div");
  note.className = "query-error";
  note.setAttribute("data-code", body.error.code);
  note.textContent = body.error.message;
  container.replaceChildren(note);
  if (highlightChip) {
    highlightChip.classList.add("evidence-conflict");
  }
}
