import { escapeHtml } from './html.js';
import { renderPath, pathHtml } from './path.js';
import type { PathView } from './path.js';
import type { DashboardSummary, ParentSummary } from './types.js';

export interface GaugeView {
  value: number;
  max: 100;
  label: string;
}

export interface StepBar {
  step: number;
  durationMs: number;
  open: boolean;
  widthPct: number;
}

export interface QuizRow {
  quizId: string | null;
  at: number | null;
  score: number;
  outOf: number;
}

export interface DashboardView {
  learnerId: string;
  gauge: GaugeView;
  subScores: { name: string; value: number }[];
  bars: StepBar[];
  quizzes: QuizRow[];
  path: PathView;
  sessionCount: number;
  excerpts: string[];
  parentView: boolean;
}

function gauge(total: number): GaugeView {
  return { value: total, max: 100, label: `${total} / 100` };
}

function subScores(scores: Record<string, number>): { name: string; value: number }[] {
  return Object.keys(scores).sort().map((name) => ({ name, value: scores[name] ?? 0 }));
}

function stepBars(durations: Record<string, { duration_ms: number; open: boolean }>): StepBar[] {
  const steps = Object.keys(durations).map(Number).sort((a, b) => a - b);
  const longest = Math.max(1, ...steps.map((s) => durations[String(s)]?.duration_ms ?? 0));
  return steps.map((step) => {
    const d = durations[String(step)];
    const ms = d?.duration_ms ?? 0;
    return {
      step,
      durationMs: ms,
      open: d?.open ?? false,
      widthPct: Math.round((100 * ms) / longest),
    };
  });
}

/** Full learner/teacher dashboard: every widget value comes from the JSON. */
export function renderDashboard(summary: DashboardSummary): DashboardView {
  return {
    learnerId: summary.learner_id,
    gauge: gauge(summary.engagement.total),
    subScores: subScores(summary.engagement.sub_scores),
    bars: stepBars(summary.step_durations),
    quizzes: summary.quiz_history.map((q) => ({
      quizId: q.quiz_id,
      at: q.at,
      score: q.score,
      outOf: 5,
    })),
    path: renderPath({
      schema_version: summary.schema_version,
      learner_id: summary.learner_id,
      plan_status: null,
      path: summary.path,
    }),
    sessionCount: summary.session_count,
    excerpts: [...summary.chat_excerpts],
    parentView: false,
  };
}

/** Parent view: aggregates only. No transcripts, no answer or feedback text. */
export function renderParentDashboard(summary: ParentSummary): DashboardView {
  return {
    learnerId: summary.learner_id,
    gauge: gauge(summary.engagement_total),
    subScores: subScores(summary.engagement_sub_scores),
    bars: [],
    quizzes: summary.quiz_scores.map((score) => ({
      quizId: null,
      at: null,
      score,
      outOf: 5,
    })),
    path: renderPath({
      schema_version: summary.schema_version,
      learner_id: summary.learner_id,
      plan_status: null,
      path: summary.path,
    }),
    sessionCount: summary.session_count,
    excerpts: [],
    parentView: true,
  };
}

export function dashboardHtml(view: DashboardView): string {
  const parts: string[] = [];
  parts.push(
    `<div class="gauge" data-value="${view.gauge.value}" data-max="${view.gauge.max}">` +
    `${escapeHtml(view.gauge.label)}</div>`);

  const subs = view.subScores.map((s) =>
    `<li class="sub-score"><span>${escapeHtml(s.name)}</span>` +
    `<span data-value="${s.value}">${s.value}</span></li>`);
  parts.push(`<ul class="sub-scores">${subs.join('')}</ul>`);

  if (view.bars.length > 0) {
    const bars = view.bars.map((b) =>
      `<div class="bar${b.open ? ' open' : ''}" data-step="${b.step}" ` +
      `data-ms="${b.durationMs}" style="width:${b.widthPct}%">` +
      `step ${b.step}: ${(b.durationMs / 1000).toFixed(0)}s</div>`);
    parts.push(`<div class="step-bars">${bars.join('')}</div>`);
  }

  const rows = view.quizzes.map((q) =>
    `<tr class="quiz-row"${q.quizId ? ` data-quiz="${escapeHtml(q.quizId)}"` : ''}>` +
    `<td data-score="${q.score}">${q.score}/${q.outOf}</td></tr>`);
  parts.push(rows.length > 0
    ? `<table class="quiz-history">${rows.join('')}</table>`
    : '<p class="quiz-history-empty">No quizzes yet.</p>');

  parts.push(pathHtml(view.path));
  parts.push(`<p class="session-count">Sessions: ${view.sessionCount}</p>`);

  if (!view.parentView && view.excerpts.length > 0) {
    const items = view.excerpts.map((t) => `<li>${escapeHtml(t)}</li>`);
    parts.push(`<ul class="chat-excerpts">${items.join('')}</ul>`);
  }
  return `<section class="dashboard${view.parentView ? ' parent' : ''}">` +
    `${parts.join('')}</section>`;
}
