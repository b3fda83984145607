/** Wire types mirroring the service's JSON responses. */

export interface VariableDoc {
  name: string;
  states: string[];
  role: "chance" | "decision" | "utility";
}

export interface NetworkDoc {
  variables: VariableDoc[];
  edges: [string, string][];
  cpts: { child: string; parents: string[]; table: number[][] }[];
}

export interface EdgeStrengthDoc {
  from: string;
  to: string;
  strength: number;
}

export interface EnsembleDoc {
  edge_strength: EdgeStrengthDoc[];
  direction_strength: { from: string; to: string; fraction: number }[];
  consensus_nodes: string[];
  consensus_edges: [string, string][];
  n_bootstraps: number;
  vote_threshold: number;
  seed: number;
  cycle_repairs: [string, string][];
  vote_rule: string;
}

export interface DiscretizationDoc {
  column: string;
  method: string;
  cut_points: number[];
  bin_labels: string[];
}

export interface ModelRecord {
  id: string;
  name: string;
  created_at: string;
  network: NetworkDoc;
  discretization: DiscretizationDoc[];
  ensemble: EnsembleDoc;
  provenance: {
    dataset_hash: string;
    config: { blacklist: [string, string][]; [key: string]: unknown };
    [key: string]: unknown;
  };
}

export type InferenceMethod = "exact" | "approx";

export interface QueryRequest {
  variable: string;
  evidence: Record<string, string | number>;
  method: InferenceMethod;
  n_samples?: number;
  repeats?: number;
  seed?: number;
}

export interface DistributionDoc {
  variable: string;
  probabilities: Record<string, number>;
  std_error?: Record<string, number>;
  method: "exact" | "approximate";
  meta: Record<string, unknown>;
}

export interface UtilityDraft {
  variable: string;
  preferences: Record<string, number>;
}

export interface PolicyRequest {
  decisions: string[];
  utility: UtilityDraft;
  evidence: Record<string, string | number>;
  mode: "exact" | "gibbs";
  iterations?: number;
  seed?: number;
  top_k?: number;
}

export interface PolicyRowDoc {
  payoff: number;
  visits?: number;
  [decisionNode: string]: string | number | undefined;
}

export interface PolicyTableDoc {
  decision_nodes: string[];
  rows: PolicyRowDoc[];
  method: string;
  meta: { tie?: boolean; [key: string]: unknown };
}

export interface JobStatusDoc {
  job_id: string;
  dataset_id: string;
  phase: string;
  progress: number;
  detail?: string;
  model_id?: string;
  error?: string | null;
}

export interface ErrorBody {
  error: { code: string; message: string };
}
