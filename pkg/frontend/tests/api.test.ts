import { afterEach, describe, expect, it } from 'vitest';

import { AlreadyResolvedError, ApiClient, ApiError } from '../src/api.js';
import { installFetchDouble } from './helpers/apiDouble.js';
import { freshState } from './helpers/fixtures.js';

let restore: (() => void) | null = null;

afterEach(() => {
  restore?.();
  restore = null;
});

describe('ApiClient', () => {
  it('fetches the review queue from the documented endpoint', async () => {
    const state = freshState();
    restore = installFetchDouble(state);
    const client = new ApiClient({ baseUrl: 'http://svc' });

    const tasks = await client.fetchQueue();

    expect(tasks).toHaveLength(3);
    expect(state.requests[0]).toMatchObject({ method: 'GET', path: '/review-queue' });
  });

  it('sends the bearer token when configured', async () => {
    const state = freshState();
    restore = installFetchDouble(state);
    const client = new ApiClient({ baseUrl: 'http://svc', token: 'sesame' });

    await client.fetchMetrics();

    expect(state.requests[0]?.headers['Authorization']).toBe('Bearer sesame');
  });

  it('resolves a task and returns the resolved view', async () => {
    const state = freshState();
    restore = installFetchDouble(state);
    const client = new ApiClient({ baseUrl: 'http://svc' });
    const taskId = state.openTasks[0]!.task_id;

    const resolved = await client.resolveTask(taskId, 4, ['scope'], 'checked');

    expect(resolved.status).toBe('resolved');
    expect(state.requests[0]?.body).toEqual({ score: 4, missing: ['scope'], note: 'checked' });
  });

  it('maps a 409 onto AlreadyResolvedError', async () => {
    const state = freshState();
    restore = installFetchDouble(state);
    const client = new ApiClient({ baseUrl: 'http://svc' });
    const taskId = state.openTasks[0]!.task_id;
    await client.resolveTask(taskId, 4, [], '');

    await expect(client.resolveTask(taskId, 3, [], '')).rejects.toBeInstanceOf(
      AlreadyResolvedError,
    );
  });

  it('maps other failures onto ApiError with the payload code', async () => {
    const state = freshState();
    restore = installFetchDouble(state);
    const client = new ApiClient({ baseUrl: 'http://svc' });

    const failure = await client.resolveTask('task-999999', 3, [], '').catch((err) => err);

    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).code).toBe('not_found');
    expect((failure as ApiError).status).toBe(404);
  });

  it('propagates network failures', async () => {
    const state = freshState();
    state.failNextWith = new TypeError('fetch failed');
    restore = installFetchDouble(state);
    const client = new ApiClient({ baseUrl: 'http://svc' });

    await expect(client.fetchQueue()).rejects.toThrow('fetch failed');
  });
});
