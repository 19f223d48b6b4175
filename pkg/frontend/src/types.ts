// Shapes of the service's JSON responses. The client never computes routing
// decisions itself; everything here mirrors what the HTTP API returns.

export interface SessionCreated {
  session_id: string;
}

export interface UtteranceResponse {
  tags: string[];
  path: number[];
  state: number;
  matched: boolean;
  exemplar_ids: number[];
  response: string;
}

export interface StateDocument {
  id: number;
  round: number;
  role: string;
  accept: boolean;
  dialogue_ids: number[];
  transitions: [string, number][];
}

export interface AutomatonDocument {
  version: number;
  start: number;
  states: StateDocument[];
}

export interface DialogueTurn {
  role: string;
  text: string;
  round: number;
}

export interface DialogueDocument {
  id: number;
  turns: DialogueTurn[];
}
