import type { AutomatonDocument } from './types.js';

const EOR = '<eor>';

export interface GraphNode {
  id: number;
  label: string;
  color: string;
  accept: boolean;
  isStart: boolean;
  dialogueCount: number;
}

export interface GraphEdge {
  from: number;
  to: number;
  label: string;
  // round-delimiter edges render dashed and unlabeled
  delimiter: boolean;
}

export interface GraphView {
  nodes: GraphNode[];
  edges: GraphEdge[];
  start: number;
}

const ROLE_COLORS: Record<string, string> = {
  user: 'palegreen',
  system: 'lightblue',
};

export function buildGraph(document: AutomatonDocument): GraphView {
  const nodes = document.states.map((state) => ({
    id: state.id,
    label: String(state.id),
    color: ROLE_COLORS[state.role] ?? 'white',
    accept: state.accept,
    isStart: state.id === document.start,
    dialogueCount: state.dialogue_ids.length,
  }));
  const edges: GraphEdge[] = [];
  for (const state of document.states) {
    for (const [tag, target] of state.transitions) {
      edges.push({
        from: state.id,
        to: target,
        label: tag === EOR ? '' : tag,
        delimiter: tag === EOR,
      });
    }
  }
  return { nodes, edges, start: document.start };
}

/** Hide states tracking fewer than minDialogues dialogues; the start node is
 * always kept, and edges touching a hidden node disappear with it. */
export function filterGraph(view: GraphView, minDialogues: number): GraphView {
  const kept = new Set(
    view.nodes
      .filter((n) => n.isStart || n.dialogueCount >= minDialogues)
      .map((n) => n.id),
  );
  return {
    nodes: view.nodes.filter((n) => kept.has(n.id)),
    edges: view.edges.filter((e) => kept.has(e.from) && kept.has(e.to)),
    start: view.start,
  };
}

/** Edge labels along a routed path, in hop order, delimiter hops skipped. */
export function pathEdgeLabels(view: GraphView, path: number[]): string[] {
  const labels: string[] = [];
  for (let i = 0; i + 1 < path.length; i++) {
    const edge = view.edges.find((e) => e.from === path[i] && e.to === path[i + 1]);
    if (edge && !edge.delimiter) labels.push(edge.label);
  }
  return labels;
}

export function highlightedNodes(view: GraphView, path: number[]): GraphNode[] {
  const wanted = new Set(path);
  return view.nodes.filter((n) => wanted.has(n.id));
}
