// Page controller: binds the queue and dashboard views to DOM containers and
// keeps the metrics panel fresh after every resolution.

import { ApiClient, type ApiConfig } from './api.js';
import { renderDashboards } from './dashboard.js';
import { QueueController } from './queue.js';
import type { DriftResponse, MetricsResponse } from './types.js';

const EMPTY_DRIFT: DriftResponse = { flags: [], runs_checked: 0 };

export class App {
  readonly api: ApiClient;
  readonly queue: QueueController;

  constructor(
    config: ApiConfig,
    private readonly queueRoot: HTMLElement,
    private readonly dashboardRoot: HTMLElement,
    private readonly noticeRoot: HTMLElement,
  ) {
    this.api = new ApiClient(config);
    this.queue = new QueueController(this.api, () => this.refreshDashboards());
  }

  async start(): Promise<void> {
    await Promise.all([this.refreshQueue(), this.refreshDashboards()]);
    this.queueRoot.addEventListener('submit', (event) => {
      const form = event.target as HTMLFormElement;
      if (!form.classList.contains('resolve')) return;
      event.preventDefault();
      void this.handleResolve(form);
    });
  }

  async refreshQueue(): Promise<void> {
    const view = await this.queue.refresh();
    this.queueRoot.innerHTML = view.html;
    this.showNotice(view.notice);
  }

  async refreshDashboards(): Promise<void> {
    let metrics: MetricsResponse = { current: null, history: [], leaderboard: [] };
    let drift = EMPTY_DRIFT;
    try {
      [metrics, drift] = await Promise.all([this.api.fetchMetrics(), this.api.fetchDrift()]);
    } catch (err) {
      this.dashboardRoot.innerHTML = `<p class="error">Dashboards unavailable: ${(err as Error).message}</p>`;
      return;
    }
    this.dashboardRoot.innerHTML = renderDashboards(metrics, drift);
  }

  async handleResolve(form: HTMLFormElement): Promise<void> {
    const data = new FormData(form);
    const taskId = form.dataset['taskId'] ?? '';
    const score = Number(data.get('score'));
    const missing = String(data.get('missing') ?? '')
      .split(',')
      .map((part) => part.trim())
      .filter(Boolean);
    const note = String(data.get('note') ?? '');
    const view = await this.queue.submitResolution(taskId, score, missing, note);
    this.queueRoot.innerHTML = view.html;
    this.showNotice(view.notice);
  }

  private showNotice(notice: string | null): void {
    this.noticeRoot.textContent = notice ?? '';
    this.noticeRoot.classList.toggle('visible', Boolean(notice));
  }
}
