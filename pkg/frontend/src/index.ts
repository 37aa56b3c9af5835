export * from './types.js';
export { ApiClient, ApiError } from './client.js';
export type { SupportBody } from './client.js';
export { SseParser, streamChat, ApiStreamError } from './sse.js';
export type { StreamHandlers } from './sse.js';
export {
  OnboardingWizard, validateStep, emptyValues,
  STEP_TITLES, TOTAL_STEPS, REVIEW_STEP,
} from './wizard.js';
export type { WizardValues, FieldError, ReviewRow, SubmitFields } from './wizard.js';
export {
  ChatController, CONTROLS_BY_PHASE, CONTROL_EVENTS, hasUnresolvedMarker,
} from './chat.js';
export type { Control, ChatMessage } from './chat.js';
export { renderPath, pathHtml } from './path.js';
export type { PathView, PathNode } from './path.js';
export {
  renderDashboard, renderParentDashboard, dashboardHtml,
} from './dashboard.js';
export type { DashboardView, GaugeView, StepBar, QuizRow } from './dashboard.js';
export { PERSONAS, personaCardHtml } from './persona.js';
export type { PersonaCard } from './persona.js';
export { escapeHtml } from './html.js';
