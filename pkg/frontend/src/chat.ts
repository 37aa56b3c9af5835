import { streamChat } from './sse.js';
import type { ApiClient } from './client.js';
import type {
  ChatFrame,
  DoneFrame,
  ErrorFrame,
  Phase,
  SessionEventResponse,
} from './types.js';

export type Control =
  | 'chat_input'
  | 'approve_plan'
  | 'reject_plan'
  | 'request_delivery'
  | 'submit_practice'
  | 'choose_next'
  | 'choose_quiz'
  | 'submit_answer'
  | 'accept_review'
  | 'decline_review';

/**
 * Controls rendered per session phase: exactly the learner moves the server
 * accepts there, nothing it would reject with a conflict.
 */
export const CONTROLS_BY_PHASE: Record<Phase, Control[]> = {
  PlanProposed: ['approve_plan', 'reject_plan'],
  PlanApproved: ['request_delivery'],
  Delivering: ['chat_input'],
  PracticeAwaitingInput: ['chat_input', 'submit_practice'],
  FeedbackGiven: [],
  PostSessionChoice: ['choose_next', 'choose_quiz'],
  QuizInProgress: ['chat_input', 'submit_answer'],
  ReviewOffered: ['accept_review', 'decline_review'],
  Reinforcing: ['chat_input'],
  Completed: [],
};

/** Event kind sent when a control button is pressed. */
export const CONTROL_EVENTS: Partial<Record<Control, string>> = {
  approve_plan: 'ApprovePlan',
  reject_plan: 'RejectPlan',
  request_delivery: 'RequestDelivery',
  submit_practice: 'SubmitPractice',
  choose_next: 'ChooseNext',
  choose_quiz: 'ChooseQuiz',
  submit_answer: 'SubmitAnswer',
  accept_review: 'AcceptReview',
  decline_review: 'DeclineReview',
};

const PLACEHOLDER = /\{[A-Za-z_][A-Za-z0-9_]*\}/;

/** True when text still carries an unresolved template marker. */
export function hasUnresolvedMarker(text: string): boolean {
  return PLACEHOLDER.test(text);
}

export interface ChatMessage {
  role: 'user' | 'assistant';
  text: string;
  pending?: boolean;
}

/**
 * One tutoring session's view state: transcript, live stream buffer, current
 * phase, and which controls are legal. A single SSE stream may be active at
 * a time; send() refuses overlap.
 */
export class ChatController {
  readonly messages: ChatMessage[] = [];
  streamBuffer = '';
  streaming = false;
  phase: Phase;
  currentIndex: number;
  retryAvailable = false;
  lastError: ErrorFrame | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly baseUrl: string,
    readonly sessionId: string,
    phase: Phase,
    currentIndex = 1,
  ) {
    this.phase = phase;
    this.currentIndex = currentIndex;
  }

  controls(): Control[] {
    return CONTROLS_BY_PHASE[this.phase];
  }

  /** Press a non-chat control; applies the server's phase in the response. */
  async pressControl(control: Control, text?: string): Promise<SessionEventResponse> {
    const kind = CONTROL_EVENTS[control];
    if (!kind) throw new Error(`control ${control} is not an event`);
    if (!this.controls().includes(control)) {
      throw new Error(`control ${control} is not legal in phase ${this.phase}`);
    }
    const resp = await this.client.postEvent(this.sessionId, kind, text);
    this.applyEventResponse(resp);
    return resp;
  }

  applyEventResponse(resp: SessionEventResponse): void {
    this.phase = resp.phase;
    this.currentIndex = resp.current_index;
    for (const m of resp.messages) {
      this.messages.push({ role: 'assistant', text: m.text });
    }
  }

  /**
   * Send a chat message over SSE. Deltas accumulate in streamBuffer; the
   * done frame finalizes the assistant message and the new phase.
   */
  async send(text: string, fetchImpl: typeof fetch = fetch): Promise<ChatFrame> {
    if (this.streaming) throw new Error('a stream is already active for this session');
    if (!this.controls().includes('chat_input')) {
      throw new Error(`chat is not legal in phase ${this.phase}`);
    }
    if (!this.client.token) throw new Error('not logged in');

    this.streaming = true;
    this.streamBuffer = '';
    this.retryAvailable = false;
    this.lastError = null;
    this.messages.push({ role: 'user', text });
    const placeholder: ChatMessage = { role: 'assistant', text: '', pending: true };
    this.messages.push(placeholder);

    try {
      const terminal = await streamChat(
        this.baseUrl, this.client.token, this.sessionId, text,
        {
          onDelta: (d) => {
            this.streamBuffer += d.text;
            placeholder.text = this.streamBuffer;
          },
          onDone: (d) => this.finish(placeholder, d),
          onError: (e) => {
            this.lastError = e;
            this.retryAvailable = e.retryable !== false;
            // drop the placeholder: nothing was persisted server-side
            const i = this.messages.indexOf(placeholder);
            if (i >= 0) this.messages.splice(i, 1);
          },
        },
        fetchImpl,
      );
      return terminal;
    } finally {
      this.streaming = false;
    }
  }

  private finish(placeholder: ChatMessage, done: DoneFrame): void {
    placeholder.text = done.text;
    placeholder.pending = false;
    this.phase = done.phase;
    this.currentIndex = done.current_index;
  }
}
