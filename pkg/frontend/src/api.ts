import type {
  AutomatonDocument,
  DialogueDocument,
  SessionCreated,
  StateDocument,
  UtteranceResponse,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(`${base}${path}`, init);
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      if (body && typeof body.detail === 'string') detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(res.status, `HTTP ${res.status}: ${detail}`);
  }
  return res.json() as Promise<T>;
}

export class RouterClient {
  constructor(private readonly base: string = '') {}

  createSession(): Promise<SessionCreated> {
    return request<SessionCreated>(this.base, '/v1/sessions', { method: 'POST' });
  }

  sendUtterance(sessionId: string, text: string): Promise<UtteranceResponse> {
    return request<UtteranceResponse>(this.base, `/v1/sessions/${sessionId}/utterances`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ text }),
    });
  }

  deleteSession(sessionId: string): Promise<unknown> {
    return fetch(`${this.base}/v1/sessions/${sessionId}`, { method: 'DELETE' });
  }

  getAutomaton(): Promise<AutomatonDocument> {
    return request<AutomatonDocument>(this.base, '/v1/automaton');
  }

  getState(stateId: number): Promise<StateDocument> {
    return request<StateDocument>(this.base, `/v1/states/${stateId}`);
  }

  getDialogue(dialogueId: number): Promise<DialogueDocument> {
    return request<DialogueDocument>(this.base, `/v1/dialogues/${dialogueId}`);
  }
}
