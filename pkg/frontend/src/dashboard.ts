// Quality dashboards: metric time series, drift anomaly badges, and the
// missing-element leaderboard. Every number comes straight from an API field;
// the only client-side work is plotting.

import { escapeHtml } from './queue.js';
import type {
  DriftResponse,
  LeaderboardRow,
  MetricsResponse,
  MetricsSnapshot,
} from './types.js';

type MetricKey = 'agreement_pct' | 'accuracy_pct' | 'error_rate_pct';

const CHART_METRICS: Array<{ key: MetricKey; label: string }> = [
  { key: 'agreement_pct', label: 'Agreement %' },
  { key: 'accuracy_pct', label: 'Accuracy %' },
  { key: 'error_rate_pct', label: 'Error rate %' },
];

export interface ChartPoint {
  x: number;
  y: number;
  label: string;
}

export function chartPoints(history: MetricsSnapshot[], key: MetricKey): ChartPoint[] {
  const points: ChartPoint[] = [];
  history.forEach((snapshot, index) => {
    const metric = snapshot[key];
    if (metric !== null) {
      points.push({ x: index, y: metric.value, label: snapshot.computed_at });
    }
  });
  return points;
}

export function renderLineChart(history: MetricsSnapshot[], key: MetricKey, label: string): string {
  const points = chartPoints(history, key);
  if (points.length === 0) {
    return `<figure class="chart" data-metric="${key}"><figcaption>${label}</figcaption>
      <p class="chart-empty">No labeled data yet.</p></figure>`;
  }
  const width = 260;
  const height = 80;
  const maxX = Math.max(points.length - 1, 1);
  const coords = points.map((point) => {
    const x = (point.x / maxX) * (width - 20) + 10;
    const y = height - 10 - (point.y / 100) * (height - 20);
    return { ...point, px: x, py: y };
  });
  const polyline = coords.map((c) => `${c.px.toFixed(1)},${c.py.toFixed(1)}`).join(' ');
  const circles = coords
    .map(
      (c) =>
        `<circle class="chart-point" cx="${c.px.toFixed(1)}" cy="${c.py.toFixed(1)}" r="3">` +
        `<title>${escapeHtml(c.label)}: ${c.y}</title></circle>`,
    )
    .join('');
  const latest = points[points.length - 1];
  return `<figure class="chart" data-metric="${key}">
    <figcaption>${label}: <strong>${latest ? latest.y : ''}</strong></figcaption>
    <svg viewBox="0 0 ${width} ${height}" role="img" aria-label="${label} over time">
      <polyline fill="none" stroke="currentColor" stroke-width="1.5" points="${polyline}"></polyline>
      ${circles}
    </svg>
  </figure>`;
}

export function renderLeaderboard(rows: LeaderboardRow[]): string {
  if (rows.length === 0) {
    return '<p class="leaderboard-empty">No missing elements reported.</p>';
  }
  const body = rows
    .map(
      (row) => `<tr>
      <td class="element">${escapeHtml(row.element)}</td>
      <td class="pct">${row.pct}%</td>
      <td class="counts">${row.documents_missing} of ${row.documents_total} documents</td>
    </tr>`,
    )
    .join('\n');
  return `<table class="leaderboard">
    <thead><tr><th>Missing element</th><th>Share</th><th>Documents</th></tr></thead>
    <tbody>${body}</tbody>
  </table>`;
}

export function renderDriftBadges(drift: DriftResponse): string {
  if (drift.flags.length === 0) {
    return `<p class="drift-clean">No drift against the golden set (${drift.runs_checked} runs checked).</p>`;
  }
  const items = drift.flags
    .map(
      (flag) => `<li>
      <span class="badge anomaly">anomaly</span>
      ${escapeHtml(flag.doc_id)} section ${flag.section_index} ${escapeHtml(flag.aspect)}:
      expected ${flag.expected_score}, observed ${flag.observed_score ?? 'missing'}
    </li>`,
    )
    .join('\n');
  return `<ul class="drift-flags">${items}</ul>`;
}

export function renderDashboards(metrics: MetricsResponse, drift: DriftResponse): string {
  const charts = CHART_METRICS.map(({ key, label }) =>
    renderLineChart(metrics.history, key, label),
  ).join('\n');
  const reviewTime = metrics.current?.avg_review_minutes;
  const biasFlags = metrics.current?.bias_flags;
  const summary = metrics.current
    ? `<dl class="summary">
        <dt>Avg review minutes</dt><dd>${reviewTime ? reviewTime.value.toFixed(2) : 'n/a'}</dd>
        <dt>Bias flags</dt><dd>${biasFlags ? biasFlags.value : 0}</dd>
      </dl>`
    : '<p class="summary-empty">No runs recorded yet.</p>';
  return `<section class="dashboards">
    ${summary}
    <div class="charts">${charts}</div>
    <h3>Drift</h3>
    ${renderDriftBadges(drift)}
    <h3>Most-missed elements</h3>
    ${renderLeaderboard(metrics.leaderboard)}
  </section>`;
}
