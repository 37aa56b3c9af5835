import { escapeHtml } from './html.js';
import type { PathResponse, PathStatus } from './types.js';

export interface PathNode {
  index: number;
  title: string;
  status: PathStatus;
  cssClass: 'done' | 'active' | 'todo';
}

export interface PathView {
  empty: boolean;
  planStatus: string | null;
  nodes: PathNode[];
  completionBanner: boolean;
}

const STATUS_CLASS: Record<PathStatus, PathNode['cssClass']> = {
  Completed: 'done',
  InProgress: 'active',
  Pending: 'todo',
};

export function renderPath(resp: PathResponse): PathView {
  const nodes = resp.path.map((p) => ({
    index: p.index,
    title: p.concept_title,
    status: p.status,
    cssClass: STATUS_CLASS[p.status],
  }));
  return {
    empty: nodes.length === 0,
    planStatus: resp.plan_status,
    nodes,
    completionBanner: nodes.length > 0 && nodes.every((n) => n.status === 'Completed'),
  };
}

export function pathHtml(view: PathView): string {
  if (view.empty) {
    return '<p class="path-empty">No learning path yet. Finish onboarding to get a plan.</p>';
  }
  const items = view.nodes.map((n) =>
    `<li class="path-node ${n.cssClass}" data-status="${n.status}">` +
    `<span class="path-index">${n.index}</span>` +
    `<span class="path-title">${escapeHtml(n.title)}</span></li>`);
  const banner = view.completionBanner
    ? '<div class="path-banner">All sessions completed. Well done!</div>'
    : '';
  return `${banner}<ol class="path">${items.join('')}</ol>`;
}
