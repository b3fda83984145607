/** Session state for the exploration dashboard.
 *
 * The state is the single source of truth for what the panels show: the
 * selected model, the evidence chips, which variables are pinned in the
 * inference panel, and the utility/decision draft. Every evidence or method
 * change re-issues the queries for all pinned variables through the
 * `issue` callback; responses are applied through `applyResult`, which
 * discards anything stale by per-variable sequence number. The UI itself
 * never computes probabilities: results are stored and rendered verbatim.
 */

import type {
  DistributionDoc,
  InferenceMethod,
  PolicyRequest,
  QueryRequest,
  UtilityDraft,
} from "./types.js";
import { clampPreference } from "./policy.js";

export type QueryIssuer = (request: QueryRequest, seq: number) => void;

export interface ApproxOptions {
  n_samples: number;
  repeats: number;
  seed: number;
}

export class SessionState {
  modelId: string | null = null;
  /** The dashboard defaults to sampling; exact is an explicit opt-in. */
  method: InferenceMethod = "approx";
  approxOptions: ApproxOptions = { n_samples: 10_000, repeats: 25, seed: 0 };

  private evidence = new Map<string, string | number>();
  private pinned: string[] = [];
  private results = new Map<string, DistributionDoc>();
  private issuedSeq = new Map<string, number>();
  private appliedSeq = new Map<string, number>();
  private seqCounter = 0;

  private decisionDraft: string[] = [];
  private utilityDraft: UtilityDraft | null = null;

  constructor(private readonly issue: QueryIssuer = () => {}) {}

  // -- evidence panel ------------------------------------------------------

  evidenceEntries(): [string, string | number][] {
    return [...this.evidence.entries()].sort((a, b) => a[0].localeCompare(b[0]));
  }

  setEvidence(variable: string, state: string | number): void {
    this.evidence.set(variable, state);
    this.reissueAll();
  }

  removeEvidence(variable: string): void {
    if (this.evidence.delete(variable)) {
      this.reissueAll();
    }
  }

  clearEvidence(): void {
    if (this.evidence.size > 0) {
      this.evidence.clear();
      this.reissueAll();
    }
  }

  // -- pinned query variables ----------------------------------------------

  pinnedVariables(): string[] {
    return [...this.pinned];
  }

  pin(variable: string): void {
    if (!this.pinned.includes(variable)) {
      this.pinned.push(variable);
      this.issueFor(variable);
    }
  }

  unpin(variable: string): void {
    const at = this.pinned.indexOf(variable);
    if (at >= 0) {
      this.pinned.splice(at, 1);
      this.results.delete(variable);
    }
  }

  setMethod(method: InferenceMethod): void {
    if (method !== this.method) {
      this.method = method;
      this.reissueAll();
    }
  }

  // -- query plumbing --------------------------------------------------------

  buildQueryRequest(variable: string): QueryRequest {
    const request: QueryRequest = {
      variable,
      evidence: Object.fromEntries(this.evidenceEntries()),
      method: this.method,
    };
    if (this.method === "approx") {
      request.n_samples = this.approxOptions.n_samples;
      request.repeats = this.approxOptions.repeats;
      request.seed = this.approxOptions.seed;
    }
    return request;
  }

  private issueFor(variable: string): void {
    const seq = ++this.seqCounter;
    this.issuedSeq.set(variable, seq);
    this.issue(this.buildQueryRequest(variable), seq);
  }

  private reissueAll(): void {
    for (const variable of this.pinned) {
      this.issueFor(variable);
    }
  }

  /** Apply a response; returns false when a newer request has been issued. */
  applyResult(variable: string, seq: number, result: DistributionDoc): boolean {
    const latest = this.issuedSeq.get(variable) ?? 0;
    const applied = this.appliedSeq.get(variable) ?? 0;
    if (seq < latest || seq <= applied) {
      return false;
    }
    this.appliedSeq.set(variable, seq);
    this.results.set(variable, result);
    return true;
  }

  getResult(variable: string): DistributionDoc | undefined {
    return this.results.get(variable);
  }

  // -- utility / decision draft ---------------------------------------------

  setDecisions(variables: string[]): void {
    this.decisionDraft = [...new Set(variables)];
  }

  setUtility(variable: string, preferences: Record<string, number>): void {
    const clamped: Record<string, number> = {};
    for (const [state, value] of Object.entries(preferences)) {
      clamped[state] = clampPreference(value);
    }
    this.utilityDraft = { variable, preferences: clamped };
  }

  buildPolicyRequest(mode: "exact" | "gibbs" = "exact", seed = 0): PolicyRequest {
    if (this.decisionDraft.length === 0 || this.utilityDraft === null) {
      throw new Error("policy request needs at least one decision and a utility");
    }
    return {
      decisions: [...this.decisionDraft],
      utility: this.utilityDraft,
      evidence: Object.fromEntries(this.evidenceEntries()),
      mode,
      seed,
    };
  }
}
