/** Thin typed client for the model service. All numbers pass through untouched. */

import type {
  DistributionDoc,
  ErrorBody,
  JobStatusDoc,
  ModelRecord,
  PolicyRequest,
  PolicyTableDoc,
  QueryRequest,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<never> {
  let code = "unknown";
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as ErrorBody;
    code = body.error.code;
    message = body.error.message;
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(readonly base: string) {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  getModel(id: string): Promise<ModelRecord> {
    return this.get(`/models/${id}`);
  }

  getJob(id: string): Promise<JobStatusDoc> {
    return this.get(`/jobs/${id}`);
  }

  query(modelId: string, request: QueryRequest): Promise<DistributionDoc> {
    return this.post(`/models/${modelId}/query`, request);
  }

  policy(modelId: string, request: PolicyRequest): Promise<PolicyTableDoc> {
    return this.post(`/models/${modelId}/policy`, request);
  }
}
