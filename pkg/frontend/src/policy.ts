/** Policy editor: preference inputs clamped to [-1, +1] and the ranked table. */

import type { PolicyTableDoc } from "./types.js";

export function clampPreference(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(1, Math.max(-1, value));
}

export function preferenceSlider(
  doc: Document,
  state: string,
  value: number,
  onChange: (state: string, value: number) => void,
): HTMLInputElement {
  const input = doc.createElement("input");
  input.type = "range";
  input.min = "-1";
  input.max = "1";
  input.step = "0.05";
  input.value = String(clampPreference(value));
  input.setAttribute("data-state", state);
  input.addEventListener("input", () => {
    const clamped = clampPreference(Number(input.value));
    input.value = String(clamped);
    onChange(state, clamped);
  });
  return input;
}

export function renderPolicyTable(container: HTMLElement, table: PolicyTableDoc): void {
  const doc = container.ownerDocument;
  const el = doc.createElement("table");
  el.className = "policy-table";
  el.setAttribute("data-method", table.method);

  const head = doc.createElement("tr");
  for (const column of [...table.decision_nodes, "payoff"]) {
    const th = doc.createElement("th");
    th.textContent = column;
    head.appendChild(th);
  }
  el.appendChild(head);

  table.rows.forEach((row, i) => {
    const tr = doc.createElement("tr");
    tr.className = "policy-row";
    tr.setAttribute("data-payoff", String(row.payoff));
    if (i === 0) {
      tr.classList.add("policy-best");
      if (table.meta.tie) {
        tr.setAttribute("data-tie", "true");
      }
    }
    for (const node of table.decision_nodes) {
      const td = doc.createElement("td");
      td.textContent = String(row[node]);
      tr.appendChild(td);
    }
    const payoff = doc.createElement("td");
    payoff.className = "payoff";
    payoff.textContent = row.payoff.toFixed(3);
    tr.appendChild(payoff);
    el.appendChild(tr);
  });

  if (table.meta.tie) {
    const badge = doc.createElement("div");
    badge.className = "tie-badge";
    badge.textContent = "top payoff is tied; best row chosen lexicographically";
    container.replaceChildren(el, badge);
  } else {
    container.replaceChildren(el);
  }
}
