import { ApiError, RouterClient } from './api.js';
import { buildGraph, filterGraph, highlightedNodes, pathEdgeLabels } from './graph.js';
import type { GraphView } from './graph.js';
import { applyTurn, emptyViewModel } from './transcript.js';
import type { ChatViewModel } from './transcript.js';

const client = new RouterClient();

let sessionId: string | null = null;
let model: ChatViewModel = emptyViewModel();
let graph: GraphView | null = null;
let pending = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderTranscript(): void {
  const pane = el<HTMLDivElement>('transcript');
  pane.replaceChildren();
  for (const turn of model.turns) {
    const row = document.createElement('div');
    row.className = `turn ${turn.role}`;
    const text = document.createElement('span');
    text.textContent = `${turn.role === 'user' ? 'You' : 'Agent'}: ${turn.text}`;
    row.appendChild(text);
    if (turn.role === 'user' && turn.fallback) {
      const badge = document.createElement('span');
      badge.className = 'badge fallback';
      badge.textContent = 'fallback';
      row.appendChild(badge);
    }
    if (turn.role === 'user' && turn.tags.length) {
      const tags = document.createElement('span');
      tags.className = 'tags';
      tags.textContent = turn.tags.map((t) => `#${t}`).join(' ');
      row.appendChild(tags);
    }
    pane.appendChild(row);
  }
  pane.scrollTop = pane.scrollHeight;
}

function renderGraph(): void {
  if (!graph) return;
  const min = Number(el<HTMLInputElement>('min-dialogues').value) || 0;
  const view = filterGraph(graph, min);
  const highlighted = new Set(highlightedNodes(view, model.highlightedPath).map((n) => n.id));
  const pane = el<HTMLDivElement>('graph');
  pane.replaceChildren();
  for (const node of view.nodes) {
    const chip = document.createElement('span');
    chip.className = 'node';
    chip.style.background = node.color;
    if (node.accept) chip.classList.add('accept');
    if (node.isStart) chip.classList.add('start');
    if (highlighted.has(node.id)) chip.classList.add('on-path');
    chip.textContent = `${node.label} (${node.dialogueCount})`;
    pane.appendChild(chip);
  }
  const labels = pathEdgeLabels(view, model.highlightedPath);
  el<HTMLDivElement>('path-info').textContent = labels.length
    ? `path: ${labels.join(' → ')}`
    : '';
}

async function renderExemplars(): Promise<void> {
  const pane = el<HTMLDivElement>('exemplars');
  pane.replaceChildren();
  for (const id of model.lastExemplarIds) {
    const block = document.createElement('details');
    const title = document.createElement('summary');
    title.textContent = `dialogue ${id}`;
    block.appendChild(title);
    try {
      const dialogue = await client.getDialogue(id);
      const body = document.createElement('pre');
      body.textContent = dialogue.turns
        .map((t) => `${t.round} ${t.role.toUpperCase()}: ${t.text}`)
        .join('\n');
      block.appendChild(body);
    } catch {
      title.textContent += ' (unavailable)';
    }
    pane.appendChild(block);
  }
}

function setBanner(message: string): void {
  const banner = el<HTMLDivElement>('banner');
  banner.textContent = message;
  banner.hidden = message === '';
}

async function send(): Promise<void> {
  const input = el<HTMLInputElement>('message');
  const button = el<HTMLButtonElement>('send');
  if (pending || sessionId === null) return;
  const text = input.value;
  pending = true;
  button.disabled = true;
  try {
    const response = await client.sendUtterance(sessionId, text);
    model = applyTurn(model, text, response);
    input.value = '';
    setBanner('');
    renderTranscript();
    renderGraph();
    void renderExemplars();
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      setBanner('Session expired; starting a new one.');
      await start();
    } else {
      setBanner(err instanceof Error ? `${err.message}; try again.` : 'Request failed; try again.');
    }
  } finally {
    pending = false;
    button.disabled = false;
  }
}

async function start(): Promise<void> {
  try {
    const created = await client.createSession();
    sessionId = created.session_id;
    model = emptyViewModel();
    graph = buildGraph(await client.getAutomaton());
    setBanner('');
    renderTranscript();
    renderGraph();
  } catch (err) {
    setBanner(err instanceof Error ? err.message : 'Service unreachable.');
  }
}

el<HTMLButtonElement>('send').addEventListener('click', () => void send());
el<HTMLInputElement>('message').addEventListener('keydown', (event) => {
  if (event.key === 'Enter') void send();
});
el<HTMLInputElement>('min-dialogues').addEventListener('input', renderGraph);
el<HTMLButtonElement>('restart').addEventListener('click', () => void start());

void start();
