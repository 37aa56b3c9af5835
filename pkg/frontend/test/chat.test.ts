import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/client.js';
import {
  ChatController, CONTROLS_BY_PHASE, CONTROL_EVENTS, hasUnresolvedMarker,
} from '../src/chat.js';
import type { Control } from '../src/chat.js';
import type { Phase, SessionEventResponse } from '../src/types.js';
import { sseResponse } from './sse.test.js';

// Independent statement of the learner moves the server accepts per phase,
// written from the session state machine, not from the source under test.
const LEGAL_MOVES: Record<Phase, { events: string[]; chat: boolean }> = {
  PlanProposed: { events: ['ApprovePlan', 'RejectPlan'], chat: false },
  PlanApproved: { events: ['RequestDelivery'], chat: false },
  Delivering: { events: [], chat: true },
  PracticeAwaitingInput: { events: ['SubmitPractice'], chat: true },
  FeedbackGiven: { events: [], chat: false },
  PostSessionChoice: { events: ['ChooseNext', 'ChooseQuiz'], chat: false },
  QuizInProgress: { events: ['SubmitAnswer'], chat: true },
  ReviewOffered: { events: ['AcceptReview', 'DeclineReview'], chat: false },
  Reinforcing: { events: [], chat: false },
  Completed: { events: [], chat: false },
};

describe('phase controls', () => {
  it('renders exactly the legal moves for every phase', () => {
    for (const phase of Object.keys(LEGAL_MOVES) as Phase[]) {
      const controls = CONTROLS_BY_PHASE[phase];
      const events = controls
        .filter((c): c is Control => c !== 'chat_input')
        .map((c) => CONTROL_EVENTS[c]);
      expect(events.sort(), phase).toEqual([...LEGAL_MOVES[phase].events].sort());
      if (LEGAL_MOVES[phase].chat) {
        expect(controls, phase).toContain('chat_input');
      }
    }
  });

  it('never renders a chat box in a phase the server rejects dialogue for', () => {
    // The server's chat allow-list; Reinforcing chat exists server-side but
    // the UI funnels review through the Accept/Decline controls first.
    const serverChatPhases = new Set<Phase>([
      'Delivering', 'PracticeAwaitingInput', 'QuizInProgress', 'Reinforcing',
    ]);
    for (const phase of Object.keys(CONTROLS_BY_PHASE) as Phase[]) {
      if (CONTROLS_BY_PHASE[phase].includes('chat_input')) {
        expect(serverChatPhases.has(phase), phase).toBe(true);
      }
    }
  });
});

function stubController(phase: Phase, fetchBody?: string) {
  const posted: { kind: string; text?: string }[] = [];
  let eventResponse: SessionEventResponse = {
    schema_version: 1,
    session_id: 'sess1',
    phase,
    current_index: 1,
    actions: [],
    messages: [],
    quiz: null,
  };
  const client = new ApiClient('http://x', (async () => {
    throw new Error('unexpected fetch');
  }) as unknown as typeof fetch);
  client.token = 'tok';
  client.postEvent = (async (_s: string, kind: string, text?: string) => {
    posted.push({ kind, text });
    return eventResponse;
  }) as ApiClient['postEvent'];
  const chat = new ChatController(client, 'http://x', 'sess1', phase);
  const fetchStub = (async () => sseResponse(fetchBody ?? '')) as unknown as typeof fetch;
  return {
    chat, posted, fetchStub,
    setEventResponse: (r: Partial<SessionEventResponse>) => {
      eventResponse = { ...eventResponse, ...r };
    },
  };
}

describe('ChatController', () => {
  it('streams deltas into the transcript; final text equals the concat', async () => {
    const body = 'data: {"text": "Hello "}\n\n'
      + 'data: {"text": "learner."}\n\n'
      + 'event: done\ndata: {"current_index": 1, "phase": "PracticeAwaitingInput", '
      + '"text": "Hello learner."}\n\n';
    const { chat, fetchStub } = stubController('Delivering', body);
    const t = await chat.send('start please', fetchStub);
    expect(t.event).toBe('done');
    expect(chat.streamBuffer).toBe('Hello learner.');
    expect(chat.messages.map((m) => m.role)).toEqual(['user', 'assistant']);
    expect(chat.messages[1]!.text).toBe('Hello learner.');
    expect(chat.messages[1]!.pending).toBe(false);
    expect(chat.phase).toBe('PracticeAwaitingInput');
  });

  it('keeps a placeholder row when done text is empty', async () => {
    const body = 'event: done\ndata: {"current_index": 1, "phase": "Delivering", '
      + '"text": ""}\n\n';
    const { chat, fetchStub } = stubController('Delivering', body);
    await chat.send('hi', fetchStub);
    expect(chat.messages).toHaveLength(2);
    expect(chat.messages[1]!.text).toBe('');
    expect(chat.messages[1]!.pending).toBe(false);
  });

  it('offers retry and drops the placeholder on an error frame', async () => {
    const body = 'data: {"text": "partial"}\n\n'
      + 'event: error\ndata: {"kind": "Timeout", "message": "slow", "retryable": true}\n\n';
    const { chat, fetchStub } = stubController('Delivering', body);
    const t = await chat.send('hi', fetchStub);
    expect(t.event).toBe('error');
    expect(chat.retryAvailable).toBe(true);
    expect(chat.lastError).toMatchObject({ kind: 'Timeout' });
    // user message stays, half-rendered assistant row is gone
    expect(chat.messages.map((m) => m.role)).toEqual(['user']);
    expect(chat.phase).toBe('Delivering');
  });

  it('allows only one active stream per session', async () => {
    const body = 'event: done\ndata: {"current_index": 1, "phase": "Delivering", '
      + '"text": "x"}\n\n';
    const { chat } = stubController('Delivering');
    let release!: () => void;
    const gate = new Promise<void>((r) => { release = r; });
    const slowFetch = (async () => {
      await gate;
      return sseResponse(body);
    }) as unknown as typeof fetch;
    const first = chat.send('one', slowFetch);
    await expect(chat.send('two', slowFetch)).rejects.toThrow(/already active/);
    release();
    await first;
    await chat.send('three', (async () => sseResponse(body)) as unknown as typeof fetch);
  });

  it('refuses chat in a phase without a chat box', async () => {
    const { chat, fetchStub } = stubController('PlanProposed');
    await expect(chat.send('hello?', fetchStub)).rejects.toThrow(/not legal/);
  });

  it('routes control presses to session events and applies the new phase', async () => {
    const { chat, posted, setEventResponse } = stubController('PlanProposed');
    setEventResponse({
      phase: 'PlanApproved',
      actions: [{ kind: 'LogApproval' }],
    });
    const resp = await chat.pressControl('approve_plan');
    expect(posted).toEqual([{ kind: 'ApprovePlan', text: undefined }]);
    expect(resp.phase).toBe('PlanApproved');
    expect(chat.phase).toBe('PlanApproved');
    expect(chat.controls()).toEqual(['request_delivery']);
  });

  it('appends service-composed messages from event responses', async () => {
    const { chat, setEventResponse } = stubController('PracticeAwaitingInput');
    setEventResponse({
      phase: 'PostSessionChoice',
      messages: [{ role: 'assistant', text: 'Nice attempt. One nuance to add.' }],
    });
    await chat.pressControl('submit_practice', 'my summary');
    expect(chat.messages.map((m) => m.text)).toEqual(['Nice attempt. One nuance to add.']);
    expect(chat.controls().sort()).toEqual(['choose_next', 'choose_quiz']);
  });

  it('rejects a control the current phase does not offer', async () => {
    const { chat } = stubController('Delivering');
    await expect(chat.pressControl('approve_plan')).rejects.toThrow(/not legal/);
  });
});

describe('placeholder guard', () => {
  it('flags unresolved template markers', () => {
    expect(hasUnresolvedMarker('Hello {learner_name}, welcome')).toBe(true);
    expect(hasUnresolvedMarker('Hello Ada, welcome')).toBe(false);
    expect(hasUnresolvedMarker('JSON braces {"a": 1} are fine')).toBe(false);
    expect(hasUnresolvedMarker('set {1, 2, 3} notation is fine')).toBe(false);
  });
});
