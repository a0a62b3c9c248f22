// Thin client over the evaluation service; the UI talks to nothing else.

import type {
  DriftResponse,
  ErrorPayload,
  MetricsResponse,
  QueueResponse,
  QueueTask,
} from './types.js';

export interface ApiConfig {
  baseUrl: string;
  token?: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export class AlreadyResolvedError extends ApiError {
  constructor(message: string) {
    super(409, 'already_resolved', message);
    this.name = 'AlreadyResolvedError';
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let payload: ErrorPayload | null = null;
  try {
    payload = (await response.json()) as ErrorPayload;
  } catch {
    // non-JSON error body; fall back to status text
  }
  const code = payload?.code ?? 'http_error';
  const message = payload?.message ?? response.statusText;
  if (response.status === 409 && code === 'already_resolved') {
    return new AlreadyResolvedError(message);
  }
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(private readonly config: ApiConfig) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.config.token) {
      headers['Authorization'] = `Bearer ${this.config.token}`;
    }
    return headers;
  }

  private url(path: string): string {
    return this.config.baseUrl.replace(/\/$/, '') + path;
  }

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.url(path), { headers: this.headers() });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  async fetchQueue(): Promise<QueueTask[]> {
    const payload = await this.get<QueueResponse>('/review-queue');
    return payload.tasks;
  }

  async fetchMetrics(): Promise<MetricsResponse> {
    return this.get<MetricsResponse>('/metrics');
  }

  async fetchDrift(): Promise<DriftResponse> {
    return this.get<DriftResponse>('/golden/drift');
  }

  async resolveTask(
    taskId: string,
    score: number,
    missing: string[],
    note: string,
  ): Promise<QueueTask> {
    const response = await fetch(this.url(`/review-queue/${taskId}/resolve`), {
      method: 'POST',
      headers: this.headers(),
      body: JSON.stringify({ score, missing, note }),
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as QueueTask;
  }
}
