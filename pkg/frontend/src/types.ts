// Payload shapes mirroring the evaluation service's JSON responses.

export interface VerdictPayload {
  score: number;
  comments: string;
  missing_elements: string[];
  confidence: number;
  aspect: string;
  agent_id: string;
  section_index: number;
  repairs_used: number;
}

export interface QueueTask {
  task_id: string;
  run_id: string;
  doc_id: string | null;
  doc_title: string;
  section_index: number;
  section_heading: string;
  aspect: string;
  reason: string;
  status: string;
  ai_verdict: VerdictPayload | null;
  agent_id: string | null;
  created_at: string;
  age_seconds: number;
}

export interface QueueResponse {
  tasks: QueueTask[];
}

export interface MetricValue {
  value: number;
  denominator: number;
}

export interface MetricsSnapshot {
  accuracy_pct: MetricValue | null;
  consistency_pct: MetricValue | null;
  avg_review_minutes: MetricValue | null;
  error_rate_pct: MetricValue | null;
  bias_flags: MetricValue | null;
  agreement_pct: MetricValue | null;
  computed_at: string;
}

export interface LeaderboardRow {
  element: string;
  documents_missing: number;
  documents_total: number;
  pct: number;
}

export interface MetricsResponse {
  current: MetricsSnapshot | null;
  history: MetricsSnapshot[];
  leaderboard: LeaderboardRow[];
}

export interface DriftFlagPayload {
  doc_id: string;
  section_index: number;
  aspect: string;
  expected_score: number;
  observed_score: number | null;
  deviation: number | null;
}

export interface DriftResponse {
  flags: DriftFlagPayload[];
  runs_checked: number;
}

export interface ErrorPayload {
  code: string;
  message: string;
  details: string;
}
