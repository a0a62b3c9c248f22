// Review queue view: oldest escalations first, resolution form with
// client-side score validation, server-side conflicts surfaced as notices.

import { AlreadyResolvedError, ApiClient } from './api.js';
import type { QueueTask } from './types.js';

export function sortByAgeDescending(tasks: QueueTask[]): QueueTask[] {
  return [...tasks].sort((a, b) => b.age_seconds - a.age_seconds);
}

export function formatAge(ageSeconds: number): string {
  if (ageSeconds < 60) return `${ageSeconds}s`;
  if (ageSeconds < 3600) return `${Math.floor(ageSeconds / 60)}m`;
  return `${Math.floor(ageSeconds / 3600)}h`;
}

export function validateResolution(score: number): string | null {
  if (!Number.isInteger(score) || score < 1 || score > 5) {
    return 'Score must be an integer between 1 and 5.';
  }
  return null;
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;');
}

export function renderQueueItem(task: QueueTask): string {
  const verdict = task.ai_verdict;
  const verdictCell = verdict
    ? `<span class="ai-score" data-score="${verdict.score}">AI score ${verdict.score}</span>
       <span class="ai-confidence">confidence ${verdict.confidence}</span>
       <p class="ai-comments">${escapeHtml(verdict.comments)}</p>
       ${verdict.missing_elements.length ? `<p class="ai-missing">missing: ${escapeHtml(verdict.missing_elements.join(', '))}</p>` : ''}`
    : '<span class="ai-score none">no AI verdict</span>';
  return `<li class="queue-item" data-task-id="${escapeHtml(task.task_id)}">
    <header>
      <strong>${escapeHtml(task.doc_title)}</strong>
      <span class="heading">${escapeHtml(task.section_heading)}</span>
      <span class="badge aspect">${escapeHtml(task.aspect)}</span>
      <span class="badge reason">${escapeHtml(task.reason)}</span>
      <span class="age">${formatAge(task.age_seconds)}</span>
    </header>
    <div class="verdict">${verdictCell}</div>
    <form class="resolve" data-task-id="${escapeHtml(task.task_id)}">
      <input name="score" type="number" min="1" max="5" step="1" placeholder="score" required>
      <input name="missing" type="text" placeholder="missing elements, comma separated">
      <input name="note" type="text" placeholder="reviewer note">
      <button type="submit">Resolve</button>
    </form>
  </li>`;
}

export function renderQueue(tasks: QueueTask[]): string {
  if (tasks.length === 0) {
    return '<p class="empty-state">Review queue is empty. Nothing awaits a human decision.</p>';
  }
  const rows = sortByAgeDescending(tasks).map(renderQueueItem).join('\n');
  return `<ul class="queue">${rows}</ul>`;
}

export interface QueueView {
  html: string;
  notice: string | null;
  error: string | null;
}

// Drives the queue without touching the DOM directly, so the flow is
// testable against a fixture-backed API double.
export class QueueController {
  tasks: QueueTask[] = [];
  notice: string | null = null;
  error: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly onMetricsStale: () => Promise<void> | void = () => {},
  ) {}

  async refresh(): Promise<QueueView> {
    try {
      this.tasks = sortByAgeDescending(await this.api.fetchQueue());
      this.error = null;
    } catch (err) {
      this.error = `Could not load the review queue: ${(err as Error).message}. Retry.`;
    }
    return this.view();
  }

  async submitResolution(
    taskId: string,
    score: number,
    missing: string[],
    note: string,
  ): Promise<QueueView> {
    const validation = validateResolution(score);
    if (validation) {
      this.notice = validation;
      return this.view();
    }
    try {
      await this.api.resolveTask(taskId, score, missing, note);
      this.tasks = this.tasks.filter((task) => task.task_id !== taskId);
      this.notice = `Resolved ${taskId}.`;
      await this.onMetricsStale();
    } catch (err) {
      if (err instanceof AlreadyResolvedError) {
        // another reviewer got there first; refresh rather than block
        this.notice = 'Task was already resolved by another reviewer.';
        await this.refresh();
      } else {
        this.error = `Resolution failed: ${(err as Error).message}. Retry.`;
      }
    }
    return this.view();
  }

  view(): QueueView {
    return {
      html: this.error ? `<p class="error">${escapeHtml(this.error)}</p>` : renderQueue(this.tasks),
      notice: this.notice,
      error: this.error,
    };
  }
}
