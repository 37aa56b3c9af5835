// JSON shapes of the tutoring service API. Field names match the wire format.

export type Role = 'Learner' | 'Teacher' | 'Parent' | 'Administrator';

export type Phase =
  | 'PlanProposed'
  | 'PlanApproved'
  | 'Delivering'
  | 'PracticeAwaitingInput'
  | 'FeedbackGiven'
  | 'PostSessionChoice'
  | 'QuizInProgress'
  | 'ReviewOffered'
  | 'Reinforcing'
  | 'Completed';

export type GoalType = 'BuildNewSkill' | 'ReviewCourse' | 'PrepareForExam';
export type EducationLevel = 'PrimarySchool' | 'MiddleSchool' | 'HighSchool' | 'University';
export type PathStatus = 'Completed' | 'InProgress' | 'Pending';

export const GOAL_TYPES: GoalType[] = ['BuildNewSkill', 'ReviewCourse', 'PrepareForExam'];
export const EDUCATION_LEVELS: EducationLevel[] = [
  'PrimarySchool', 'MiddleSchool', 'HighSchool', 'University',
];

export interface LoginResponse {
  schema_version: number;
  token: string;
  role: Role;
  subject_id: string;
  permissions: string[];
  ttl_ms: number;
}

export interface PermissionsResponse {
  schema_version: number;
  role: Role;
  subject_id: string;
  permissions: string[];
}

/** Engagement events the wizard forwards with the onboarding request. */
export interface WizardEvent {
  kind: 'StepEntered' | 'StepExited' | 'GoalTypeSelected' | 'DatesSelected';
  event_id: string;
  at: number;
  step?: number;
  goal?: string;
  start?: string;
  end?: string;
}

export interface SupportResponse {
  schema_version: number;
  support_id: string;
  status: string;
  session_id?: string;
  plan?: {
    plan_id: string;
    status: string;
    sessions: { index: number; concept_title: string }[];
  };
  assistant_config?: Record<string, unknown>;
}

export interface MaterialResponse {
  schema_version: number;
  material_id: string;
  chunk_count: number;
}

export interface SessionEventResponse {
  schema_version: number;
  session_id: string;
  phase: Phase;
  current_index: number;
  actions: Array<{ kind: string } & Record<string, unknown>>;
  messages: Array<{ role: string; text: string }>;
  quiz: { cursor: number; score: number } | null;
}

export interface PathEntry {
  index: number;
  concept_title: string;
  status: PathStatus;
}

export interface PathResponse {
  schema_version: number;
  learner_id: string;
  plan_status: string | null;
  path: PathEntry[];
}

export interface QuizAnswerRecord {
  given: string;
  correct: boolean;
  feedback_text: string;
  review_offered: boolean;
}

export interface QuizRecord {
  quiz_id: string;
  at: number;
  score: number;
  answers: QuizAnswerRecord[];
}

export interface StepTiming {
  duration_ms: number;
  open: boolean;
  pairs: number;
}

export interface DashboardSummary {
  schema_version: number;
  learner_id: string;
  engagement: { total: number; sub_scores: Record<string, number> };
  step_durations: Record<string, StepTiming>;
  quiz_history: QuizRecord[];
  path: PathEntry[];
  session_count: number;
  recent_events: { kind: string; at: number }[];
  chat_excerpts: string[];
}

/** What the API returns to a linked parent: aggregates only, no text. */
export interface ParentSummary {
  schema_version: number;
  learner_id: string;
  engagement_total: number;
  engagement_sub_scores: Record<string, number>;
  path: PathEntry[];
  session_count: number;
  quiz_scores: number[];
}

export interface HealthResponse {
  schema_version: number;
  status: string;
  llm: { healthy: boolean; reason: string };
  storage: string;
}

// SSE chat frames. Deltas arrive on the default event, done/error are named.
export interface DeltaFrame {
  text: string;
}

export interface DoneFrame {
  text: string;
  phase: Phase;
  current_index: number;
  usage?: { prompt_tokens: number; completion_tokens: number; approximate: boolean };
}

export interface ErrorFrame {
  kind: string;
  retryable: boolean;
  message?: string;
  phase?: string;
}

export type ChatFrame =
  | { event: 'delta'; data: DeltaFrame }
  | { event: 'done'; data: DoneFrame }
  | { event: 'error'; data: ErrorFrame };
