import type { UtteranceResponse } from './types.js';

export interface TranscriptTurn {
  role: 'user' | 'system';
  text: string;
  tags: string[];
  // true when the router could not consume the turn's tags and fell back
  fallback: boolean;
  state: number;
  exemplarIds: number[];
}

export interface ChatViewModel {
  turns: TranscriptTurn[];
  highlightedPath: number[];
  lastExemplarIds: number[];
}

export function emptyViewModel(): ChatViewModel {
  return { turns: [], highlightedPath: [], lastExemplarIds: [] };
}

/** Fold one routing response into the view: the user turn it answered plus
 * the generated system turn, with the graph highlight moved to the new path. */
export function applyTurn(
  model: ChatViewModel,
  userText: string,
  response: UtteranceResponse,
): ChatViewModel {
  const fallback = !response.matched;
  const userTurn: TranscriptTurn = {
    role: 'user',
    text: userText,
    tags: response.tags,
    fallback,
    state: response.state,
    exemplarIds: response.exemplar_ids,
  };
  const systemTurn: TranscriptTurn = {
    role: 'system',
    text: response.response,
    tags: [],
    fallback,
    state: response.state,
    exemplarIds: response.exemplar_ids,
  };
  return {
    turns: [...model.turns, userTurn, systemTurn],
    highlightedPath: [...response.path],
    lastExemplarIds: [...response.exemplar_ids],
  };
}

export function fallbackCount(model: ChatViewModel): number {
  return model.turns.filter((t) => t.role === 'user' && t.fallback).length;
}
