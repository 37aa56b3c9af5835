import type { ChatFrame, DeltaFrame, DoneFrame, ErrorFrame } from './types.js';

/**
 * Incremental SSE parser. Feed it raw text chunks in any split; it returns
 * complete frames and keeps the unterminated tail for the next call.
 */
export class SseParser {
  private buffer = '';

  push(chunk: string): ChatFrame[] {
    this.buffer += chunk;
    const frames: ChatFrame[] = [];
    const blocks = this.buffer.split(/\r?\n\r?\n/);
    this.buffer = blocks.pop() ?? '';
    for (const block of blocks) {
      const frame = parseBlock(block);
      if (frame) frames.push(frame);
    }
    return frames;
  }

  /** Anything left unterminated when the stream closed. */
  get pending(): string {
    return this.buffer;
  }
}

function parseBlock(block: string): ChatFrame | null {
  let event = 'delta'; // server sends deltas on the default event
  const dataLines: string[] = [];
  for (const rawLine of block.split(/\r?\n/)) {
    if (rawLine.startsWith('event:')) {
      event = rawLine.slice(6).trim();
    } else if (rawLine.startsWith('data:')) {
      dataLines.push(rawLine.slice(5).trim());
    }
  }
  if (dataLines.length === 0) return null;
  let data: unknown;
  try {
    data = JSON.parse(dataLines.join('\n'));
  } catch {
    return null;
  }
  if (event === 'done') return { event: 'done', data: data as DoneFrame };
  if (event === 'error') return { event: 'error', data: data as ErrorFrame };
  return { event: 'delta', data: data as DeltaFrame };
}

export interface StreamHandlers {
  onDelta?: (d: DeltaFrame) => void;
  onDone?: (d: DoneFrame) => void;
  onError?: (e: ErrorFrame) => void;
}

/**
 * POST a chat message and consume the SSE response until done/error.
 * Resolves with the terminal frame.
 */
export async function streamChat(
  baseUrl: string,
  token: string,
  sessionId: string,
  message: string,
  handlers: StreamHandlers,
  fetchImpl: typeof fetch = fetch,
  signal?: AbortSignal,
): Promise<ChatFrame> {
  const res = await fetchImpl(`${baseUrl}/api/sessions/${sessionId}/chat`, {
    method: 'POST',
    headers: {
      'Content-Type': 'application/json',
      Authorization: `Bearer ${token}`,
    },
    body: JSON.stringify({ message }),
    signal,
  });
  if (!res.ok) {
    let body: unknown = null;
    try {
      body = await res.json();
    } catch {
      // non-JSON error body; status alone will have to do
    }
    throw new ApiStreamError(res.status, body);
  }
  if (!res.body) throw new ApiStreamError(res.status, 'no response body');

  const reader = res.body.getReader();
  const decoder = new TextDecoder('utf-8');
  const parser = new SseParser();
  let terminal: ChatFrame | null = null;

  while (true) {
    const { value, done } = await reader.read();
    if (done) break;
    for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
      if (frame.event === 'delta') {
        handlers.onDelta?.(frame.data);
      } else if (frame.event === 'done') {
        handlers.onDone?.(frame.data);
        terminal = frame;
      } else {
        handlers.onError?.(frame.data);
        terminal = frame;
      }
    }
  }
  if (!terminal) throw new ApiStreamError(0, 'stream ended without done or error frame');
  return terminal;
}

export class ApiStreamError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: unknown,
  ) {
    super(`chat stream failed: ${status}`);
    this.name = 'ApiStreamError';
  }
}
