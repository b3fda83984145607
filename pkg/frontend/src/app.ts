/** Browser entry point: wires the panels to a running service.
 *
 * Serve the backend (`bdnet serve --port 8330`), build this package
 * (`npm run build`), open index.html, enter a model id, and explore.
 */

import { ApiClient, ApiError } from "./api.js";
import { renderNetwork } from "./graph.js";
import { renderPosterior, renderQueryError } from "./bars.js";
import { renderPolicyTable } from "./policy.js";
import { SessionState } from "./state.js";
import type { ModelRecord } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
}

export function boot(): void {
  const api = new ApiClient(
    (document.querySelector("meta[name=bdnet-api]") as HTMLMetaElement | null)
      ?.content ?? "http://127.0.0.1:8330",
  );
  let model: ModelRecord | null = null;

  const state = new SessionState((request, seq) => {
    if (!state.modelId) return;
    api
      .query(state.modelId, request)
      .then((dist) => {
        if (state.applyResult(request.variable, seq, dist)) {
          renderPinned();
        }
      })
      .catch((error: unknown) => {
        if (error instanceof ApiError) {
          renderQueryError(el("inference"), {
            error: { code: error.code, message: error.message },
          });
        }
      });
  });

  function renderPinned(): void {
    const host = el("inference");
    host.replaceChildren();
    for (const variable of state.pinnedVariables()) {
      const result = state.getResult(variable);
      if (result) {
        const slot = document.createElement("div");
        host.appendChild(slot);
        renderPosterior(slot, result);
      }
    }
  }

  function renderEvidence(): void {
    const host = el("evidence");
    host.replaceChildren();
    for (const [variable, value] of state.evidenceEntries()) {
      const chip = document.createElement("button");
      chip.className = "evidence-chip";
      chip.textContent = `${variable} = ${value} ✕`;
      chip.addEventListener("click", () => {
        state.removeEvidence(variable);
        renderEvidence();
      });
      host.appendChild(chip);
    }
  }

  el<HTMLButtonElement>("load-model").addEventListener("click", () => {
    const id = el<HTMLInputElement>("model-id").value.trim();
    api.getModel(id).then((record) => {
      model = record;
      state.modelId = record.id;
      renderNetwork(el("graph"), record);
      const picker = el<HTMLSelectElement>("variable-picker");
      picker.replaceChildren(
        ...record.network.variables.map((v) => {
          const option = document.createElement("option");
          option.value = v.name;
          option.textContent = v.name;
          return option;
        }),
      );
    });
  });

  el<HTMLButtonElement>("pin-variable").addEventListener("click", () => {
    state.pin(el<HTMLSelectElement>("variable-picker").value);
  });

  el<HTMLButtonElement>("add-evidence").addEventListener("click", () => {
    if (!model) return;
    const variable = el<HTMLSelectElement>("variable-picker").value;
    const raw = el<HTMLInputElement>("evidence-value").value.trim();
    const numeric = Number(raw);
    state.setEvidence(variable, Number.isNaN(numeric) ? raw : numeric);
    renderEvidence();
  });

  el<HTMLSelectElement>("method-toggle").addEventListener("change", (event) => {
    state.setMethod(
      (event.target as HTMLSelectElement).value === "exact" ? "exact" : "approx",
    );
  });

  el<HTMLButtonElement>("run-policy").addEventListener("click", () => {
    if (!state.modelId || !model) return;
    const decisions = el<HTMLInputElement>("policy-decisions")
      .value.split(",")
      .map((s) => s.trim())
      .filter(Boolean);
    const hypothesis = el<HTMLInputElement>("policy-hypothesis").value.trim();
    const variable = model.network.variables.find((v) => v.name === hypothesis);
    if (!variable) return;
    const preferences: Record<string, number> = {};
    variable.states.forEach((s, i) => {
      preferences[s] =
        variable.states.length === 1 ? 1 : -1 + (2 * i) / (variable.states.length - 1);
    });
    state.setDecisions(decisions);
    state.setUtility(hypothesis, preferences);
    api
      .policy(state.modelId, state.buildPolicyRequest("exact"))
      .then((table) => renderPolicyTable(el("policy"), table));
  });
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
