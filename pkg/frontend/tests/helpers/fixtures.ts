import { readFileSync } from 'node:fs';

import type { DoubleState } from './apiDouble.js';
import type { DriftResponse, MetricsResponse, QueueResponse, QueueTask } from '../../src/types.js';

export function loadFixture<T>(name: string): T {
  const url = new URL(`../fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, 'utf-8')) as T;
}

export function recordedQueue(): QueueTask[] {
  return loadFixture<QueueResponse>('queue.json').tasks;
}

export function recordedMetrics(): MetricsResponse {
  return loadFixture<MetricsResponse>('metrics.json');
}

export function recordedDrift(): DriftResponse {
  return loadFixture<DriftResponse>('drift.json');
}

export function freshState(): DoubleState {
  return {
    openTasks: recordedQueue(),
    resolvedTasks: [],
    calibrationLog: [],
    metrics: recordedMetrics(),
    drift: recordedDrift(),
    requests: [],
  };
}
