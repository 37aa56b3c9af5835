import type { ApiClient } from './client.js';
import type { SupportBody } from './client.js';
import type { SupportResponse, WizardEvent } from './types.js';
import { EDUCATION_LEVELS, GOAL_TYPES } from './types.js';

// Seven steps: 1 subject+objective, 2 goal+description, 3 materials+keywords,
// 4 level+language, 5 schedule, 6 review+submit, 7 assistant preview.
export const STEP_TITLES = [
  'Subject and objective',
  'Goal',
  'Study materials',
  'Level and language',
  'Schedule',
  'Review',
  'Your assistant',
] as const;

export const TOTAL_STEPS = 7;
export const REVIEW_STEP = 6;

export interface WizardValues {
  subjectArea: string;
  learningObjective: string;
  goalType: string;
  shortDescription: string;
  materials: { filename: string; text: string }[];
  keywords: string[];
  educationLevel: string;
  contentLanguage: string;
  startDate: string;
  endDate: string;
  estimatedDurationMinutes: number | null;
}

export interface FieldError {
  field: string;
  message: string;
}

const LANGUAGE_TAG = /^[A-Za-z]{2,3}(-[A-Za-z0-9]{2,8})*$/;
const ISO_DATE = /^\d{4}-\d{2}-\d{2}$/;

export function emptyValues(): WizardValues {
  return {
    subjectArea: '',
    learningObjective: '',
    goalType: '',
    shortDescription: '',
    materials: [],
    keywords: [],
    educationLevel: '',
    contentLanguage: '',
    startDate: '',
    endDate: '',
    estimatedDurationMinutes: null,
  };
}

/**
 * Client-side mirror of the server's onboarding validation, split per step.
 * Never weaker than the server: anything passing here passes submission.
 */
export function validateStep(step: number, v: WizardValues): FieldError[] {
  const errors: FieldError[] = [];
  if (step === 1) {
    if (!v.learningObjective.trim()) {
      errors.push({ field: 'learning_objective', message: 'learning objective is required' });
    }
    if (!v.subjectArea.trim()) {
      errors.push({ field: 'subject_area', message: 'subject area is required' });
    }
  } else if (step === 2) {
    if (!v.goalType.trim()) {
      errors.push({ field: 'goal_type', message: 'goal type is required' });
    } else if (!(GOAL_TYPES as string[]).includes(v.goalType)) {
      errors.push({ field: 'goal_type', message: `unknown goal type: ${v.goalType}` });
    }
  } else if (step === 4) {
    if (!v.educationLevel.trim()) {
      errors.push({ field: 'education_level', message: 'education level is required' });
    } else if (!(EDUCATION_LEVELS as string[]).includes(v.educationLevel)) {
      errors.push({ field: 'education_level', message: `unknown education level: ${v.educationLevel}` });
    }
    if (!v.contentLanguage.trim() || !LANGUAGE_TAG.test(v.contentLanguage.trim())) {
      errors.push({ field: 'content_language', message: 'content language is required' });
    }
  } else if (step === 5) {
    for (const [field, value] of [['start_date', v.startDate], ['end_date', v.endDate]] as const) {
      if (value && !ISO_DATE.test(value)) {
        errors.push({ field, message: 'dates use YYYY-MM-DD' });
      }
    }
    if (v.startDate && v.endDate && ISO_DATE.test(v.startDate) && ISO_DATE.test(v.endDate)
        && v.endDate < v.startDate) {
      errors.push({ field: 'end_date', message: 'end date precedes start date' });
    }
    if (v.estimatedDurationMinutes !== null && v.estimatedDurationMinutes <= 0) {
      errors.push({
        field: 'estimated_duration_minutes',
        message: 'estimated duration must be positive when given',
      });
    }
  }
  // Steps 3 (materials), 6 (review) and 7 carry no blocking rules of their own.
  return errors;
}

export interface ReviewRow {
  field: keyof WizardValues;
  label: string;
  value: string;
}

export type SubmitFields = Omit<SupportBody, 'learner_id' | 'submit' | 'support_id' | 'events'>;

interface WizardOptions {
  clock?: () => number;
  idPrefix?: string;
}

/**
 * Local wizard state machine. Holds form values and the engagement events
 * for the visit history; nothing touches the server until submit().
 *
 * Event contract: every step visit emits exactly one StepEntered and one
 * StepExited (steps 1-6; the post-submit preview step emits none).
 */
export class OnboardingWizard {
  readonly values: WizardValues = emptyValues();
  readonly events: WizardEvent[] = [];
  step = 1;
  submitted = false;

  private seq = 0;
  private readonly clock: () => number;
  private readonly idPrefix: string;

  constructor(readonly learnerId: string, opts: WizardOptions = {}) {
    this.clock = opts.clock ?? Date.now;
    this.idPrefix = opts.idPrefix ?? 'w';
    this.emit({ kind: 'StepEntered', step: this.step });
  }

  update(patch: Partial<WizardValues>): void {
    if (this.submitted) throw new Error('wizard already submitted');
    Object.assign(this.values, patch);
    if (patch.goalType && (GOAL_TYPES as string[]).includes(patch.goalType)) {
      this.emit({ kind: 'GoalTypeSelected', goal: patch.goalType });
    }
    if ((patch.startDate !== undefined || patch.endDate !== undefined)
        && ISO_DATE.test(this.values.startDate) && ISO_DATE.test(this.values.endDate)) {
      this.emit({ kind: 'DatesSelected', start: this.values.startDate, end: this.values.endDate });
    }
  }

  addMaterial(filename: string, text: string): void {
    this.values.materials.push({ filename, text });
  }

  stepErrors(): FieldError[] {
    return validateStep(this.step, this.values);
  }

  /** Validity flag per step 1..7, from the current values. */
  validity(): boolean[] {
    return Array.from({ length: TOTAL_STEPS }, (_, i) =>
      validateStep(i + 1, this.values).length === 0);
  }

  /**
   * Advance to the next step. Returns the blocking errors (and stays put)
   * when the current step fails validation; null on success.
   */
  next(): FieldError[] | null {
    if (this.submitted || this.step >= REVIEW_STEP) {
      throw new Error(`cannot advance from step ${this.step}`);
    }
    const errors = this.stepErrors();
    if (errors.length > 0) return errors;
    this.emit({ kind: 'StepExited', step: this.step });
    this.step += 1;
    this.emit({ kind: 'StepEntered', step: this.step });
    return null;
  }

  back(): void {
    if (this.submitted || this.step <= 1 || this.step > REVIEW_STEP) {
      throw new Error(`cannot go back from step ${this.step}`);
    }
    this.emit({ kind: 'StepExited', step: this.step });
    this.step -= 1;
    this.emit({ kind: 'StepEntered', step: this.step });
  }

  /** Every collected value, as rendered read-only on the review step. */
  reviewRows(): ReviewRow[] {
    const v = this.values;
    return [
      { field: 'subjectArea', label: 'Subject area', value: v.subjectArea },
      { field: 'learningObjective', label: 'Learning objective', value: v.learningObjective },
      { field: 'goalType', label: 'Goal type', value: v.goalType },
      { field: 'shortDescription', label: 'Description', value: v.shortDescription },
      {
        field: 'materials', label: 'Materials',
        value: v.materials.map((m) => m.filename).join(', '),
      },
      { field: 'keywords', label: 'Keywords', value: v.keywords.join(', ') },
      { field: 'educationLevel', label: 'Education level', value: v.educationLevel },
      { field: 'contentLanguage', label: 'Language', value: v.contentLanguage },
      { field: 'startDate', label: 'Start date', value: v.startDate },
      { field: 'endDate', label: 'End date', value: v.endDate },
      {
        field: 'estimatedDurationMinutes', label: 'Minutes per session',
        value: v.estimatedDurationMinutes === null ? '' : String(v.estimatedDurationMinutes),
      },
    ];
  }

  canSubmit(): boolean {
    if (this.step !== REVIEW_STEP || this.submitted) return false;
    for (let s = 1; s < REVIEW_STEP; s++) {
      if (validateStep(s, this.values).length > 0) return false;
    }
    return true;
  }

  /** The submission fields, shaped for the support endpoint. */
  submitFields(): SubmitFields {
    const v = this.values;
    const fields: SubmitFields = {
      learning_objective: v.learningObjective,
      short_description: v.shortDescription,
      subject_area: v.subjectArea,
      goal_type: v.goalType,
      education_level: v.educationLevel,
      content_language: v.contentLanguage,
    };
    if (v.startDate) fields.start_date = v.startDate;
    if (v.endDate) fields.end_date = v.endDate;
    if (v.keywords.length > 0) fields.keywords = [...v.keywords];
    if (v.estimatedDurationMinutes !== null) {
      fields.estimated_duration_minutes = v.estimatedDurationMinutes;
    }
    return fields;
  }

  /**
   * Flush everything to the server: draft with the collected events, then
   * material uploads, then the submission. Lands on the preview step.
   */
  async submit(client: ApiClient): Promise<SupportResponse> {
    if (!this.canSubmit()) {
      throw new Error('submit blocked: wizard incomplete or already submitted');
    }
    this.emit({ kind: 'StepExited', step: this.step });
    const draft = await client.postSupport({
      learner_id: this.learnerId,
      submit: false,
      events: [...this.events],
    });
    for (const m of this.values.materials) {
      await client.uploadMaterial(draft.support_id, m.filename, m.text);
    }
    const result = await client.postSupport({
      learner_id: this.learnerId,
      support_id: draft.support_id,
      submit: true,
      ...this.submitFields(),
    });
    this.submitted = true;
    this.step = 7;
    return result;
  }

  private emit(fields: Omit<WizardEvent, 'event_id' | 'at'>): void {
    this.seq += 1;
    this.events.push({
      ...fields,
      event_id: `${this.idPrefix}${String(this.seq).padStart(2, '0')}`,
      at: this.clock(),
    });
  }
}
