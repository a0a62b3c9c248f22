// Fixture-backed stand-in for the evaluation service: a fetch router over
// mutable in-memory state, seeded from recorded API payloads.

import type { DriftResponse, MetricsResponse, QueueTask } from '../../src/types.js';

export interface RecordedRequest {
  method: string;
  path: string;
  headers: Record<string, string>;
  body: unknown;
}

export interface DoubleState {
  openTasks: QueueTask[];
  resolvedTasks: QueueTask[];
  calibrationLog: Array<{ task_id: string; human_score: number; note: string }>;
  metrics: MetricsResponse;
  drift: DriftResponse;
  requests: RecordedRequest[];
  failNextWith?: Error;
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export function installFetchDouble(state: DoubleState): () => void {
  const original = globalThis.fetch;

  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = new URL(String(input));
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    state.requests.push({
      method,
      path: url.pathname,
      headers: (init?.headers as Record<string, string>) ?? {},
      body,
    });
    if (state.failNextWith) {
      const failure = state.failNextWith;
      state.failNextWith = undefined;
      throw failure;
    }

    if (method === 'GET' && url.pathname === '/review-queue') {
      return json({ tasks: state.openTasks });
    }
    if (method === 'GET' && url.pathname === '/metrics') {
      return json(state.metrics);
    }
    if (method === 'GET' && url.pathname === '/golden/drift') {
      return json(state.drift);
    }
    const resolveMatch = url.pathname.match(/^\/review-queue\/([^/]+)\/resolve$/);
    if (method === 'POST' && resolveMatch?.[1]) {
      const taskId = resolveMatch[1];
      const score = (body as { score: number }).score;
      if (!Number.isInteger(score) || score < 1 || score > 5) {
        return json({ code: 'invalid_score', message: 'score out of range', details: '' }, 400);
      }
      const open = state.openTasks.find((task) => task.task_id === taskId);
      if (!open) {
        if (state.resolvedTasks.some((task) => task.task_id === taskId)) {
          return json(
            {
              code: 'already_resolved',
              message: `task ${taskId} is already resolved`,
              details: '',
            },
            409,
          );
        }
        return json({ code: 'not_found', message: `no review task '${taskId}'`, details: '' }, 404);
      }
      state.openTasks = state.openTasks.filter((task) => task.task_id !== taskId);
      const resolved = { ...open, status: 'resolved' };
      state.resolvedTasks.push(resolved);
      state.calibrationLog.push({
        task_id: taskId,
        human_score: score,
        note: (body as { note?: string }).note ?? '',
      });
      return json(resolved);
    }
    return json({ code: 'not_found', message: `no route for ${method} ${url.pathname}`, details: '' }, 404);
  }) as typeof fetch;

  return () => {
    globalThis.fetch = original;
  };
}
