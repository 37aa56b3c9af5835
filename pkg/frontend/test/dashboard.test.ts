import { describe, expect, it } from 'vitest';

import { dashboardHtml, renderDashboard, renderParentDashboard } from '../src/dashboard.js';
import { escapeHtml } from '../src/html.js';
import type { DashboardSummary, ParentSummary } from '../src/types.js';
import fullFixture from './fixtures/dashboard_f1.json';
import parentFixture from './fixtures/parent_f1.json';

const F1 = fullFixture as unknown as DashboardSummary;
const PARENT_F1 = parentFixture as unknown as ParentSummary;

describe('dashboard fidelity against fixture F1', () => {
  const view = renderDashboard(F1);

  it('gauge equals the engagement total exactly', () => {
    expect(view.gauge.value).toBe(F1.engagement.total);
    expect(view.gauge.value).toBe(86.1875);
    expect(view.gauge.max).toBe(100);
  });

  it('sub-score widgets equal the JSON sub-scores', () => {
    const rendered = Object.fromEntries(view.subScores.map((s) => [s.name, s.value]));
    expect(rendered).toEqual(F1.engagement.sub_scores);
  });

  it('per-step bars equal the JSON durations, in step order', () => {
    expect(view.bars.map((b) => b.step)).toEqual([1, 2, 3, 4, 5, 6]);
    for (const bar of view.bars) {
      const expected = F1.step_durations[String(bar.step)]!;
      expect(bar.durationMs).toBe(expected.duration_ms);
      expect(bar.open).toBe(expected.open);
    }
    // longest dwell (step 1) fills the track
    expect(view.bars[0]!.widthPct).toBe(100);
  });

  it('quiz history rows equal the JSON history', () => {
    expect(view.quizzes.map((q) => q.score)).toEqual(
      F1.quiz_history.map((q) => q.score));
    expect(view.quizzes[0]).toMatchObject({
      quizId: F1.quiz_history[0]!.quiz_id,
      at: F1.quiz_history[0]!.at,
      score: 3,
      outOf: 5,
    });
  });

  it('path nodes mirror the JSON path', () => {
    expect(view.path.nodes.map((n) => [n.index, n.title, n.status])).toEqual(
      F1.path.map((p) => [p.index, p.concept_title, p.status]));
  });

  it('the html carries the exact values', () => {
    const html = dashboardHtml(view);
    expect(html).toContain('data-value="86.1875"');
    expect(html).toContain('data-ms="90000"');
    expect(html).toContain('data-ms="60000"');
    expect(html).toContain(`data-quiz="${F1.quiz_history[0]!.quiz_id}"`);
    expect(html).toContain('data-score="3"');
    expect(html).toContain(`Sessions: ${F1.session_count}`);
  });

  it('zero summary renders zeroed widgets', () => {
    const zero: DashboardSummary = {
      schema_version: 1,
      learner_id: 'ada',
      engagement: { total: 0.0, sub_scores: {} },
      step_durations: {},
      quiz_history: [],
      path: [],
      session_count: 0,
      recent_events: [],
      chat_excerpts: [],
    };
    const v = renderDashboard(zero);
    expect(v.gauge.value).toBe(0);
    expect(v.bars).toEqual([]);
    expect(v.quizzes).toEqual([]);
    expect(v.path.empty).toBe(true);
    const html = dashboardHtml(v);
    expect(html).toContain('data-value="0"');
    expect(html).toContain('No quizzes yet.');
  });
});

describe('parent view', () => {
  const view = renderParentDashboard(PARENT_F1);
  const html = dashboardHtml(view);

  it('keeps the aggregate numbers', () => {
    expect(view.gauge.value).toBe(PARENT_F1.engagement_total);
    expect(view.quizzes.map((q) => q.score)).toEqual(PARENT_F1.quiz_scores);
    expect(view.sessionCount).toBe(PARENT_F1.session_count);
    expect(view.path.nodes).toHaveLength(4);
  });

  it('contains no message-body text from the learner dashboard', () => {
    // every chat excerpt, quiz answer, and feedback line of the full
    // fixture must be absent, raw or html-escaped
    const bodies = [
      ...F1.chat_excerpts,
      ...F1.quiz_history.flatMap((q) => q.answers.map((a) => a.given)),
      ...F1.quiz_history.flatMap((q) => q.answers.map((a) => a.feedback_text)),
    ];
    expect(bodies.length).toBeGreaterThan(10);
    for (const text of bodies) {
      expect(html.includes(text), text).toBe(false);
      expect(html.includes(escapeHtml(text)), text).toBe(false);
    }
    expect(view.excerpts).toEqual([]);
  });

  it('the learner view does show excerpts (the absence check bites)', () => {
    const learnerHtml = dashboardHtml(renderDashboard(F1));
    const sample = F1.chat_excerpts[0]!;
    expect(learnerHtml.includes(escapeHtml(sample))).toBe(true);
  });
});
