/**
 * Behavior-tree view model: a pure projection of an SBT Turtle document
 * plus per-node tick statuses painted on afterwards by trace frames.
 */

import { parseTurtle, TurtleError } from "./turtle.js";
import type { Triple } from "./turtle.js";

const SBT = "http://sbtforge.org/vocab/sbt#";
const RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
const RDF_TYPE = RDF + "type";
const RDF_FIRST = RDF + "first";
const RDF_REST = RDF + "rest";
const RDF_NIL = RDF + "nil";
const HAS_CHILDREN = SBT + "hasChildren";
const LABEL = SBT + "label";

export type NodeKind =
  | "root"
  | "sequence"
  | "priority"
  | "condition"
  | "update"
  | "goalProducer"
  | "action"
  | "breakpoint";

export type TickStatus = "succeeded" | "failed" | "running";

// colored borders in the live view; documented mapping
export const STATUS_COLOR: Record<TickStatus, string> = {
  succeeded: "green",
  failed: "red",
  running: "amber",
};

export interface ViewNode {
  id: string;
  kind: NodeKind;
  label: string;
  lastStatus: TickStatus | null;
  children: string[];
  x: number;
  y: number;
}

export interface TreeViewModel {
  rootId: string;
  nodes: ViewNode[];
}

export type TreeRender =
  | { state: "ready"; model: TreeViewModel }
  | { state: "diagnostic"; message: string };

const KIND_BY_CLASS = new Map<string, NodeKind>(
  (["root", "sequence", "priority", "condition", "update", "goalProducer", "action", "breakpoint"] as NodeKind[]).map(
    (kind) => [SBT + kind[0].toUpperCase() + kind.slice(1), kind],
  ),
);

interface Subject {
  types: string[];
  props: Map<string, Triple["object"][]>;
}

function indexBySubject(triples: Triple[]): Map<string, Subject> {
  const subjects = new Map<string, Subject>();
  for (const t of triples) {
    let entry = subjects.get(t.subject);
    if (!entry) {
      entry = { types: [], props: new Map() };
      subjects.set(t.subject, entry);
    }
    if (t.predicate === RDF_TYPE && t.object.kind === "iri") {
      entry.types.push(t.object.value);
    }
    const values = entry.props.get(t.predicate) ?? [];
    values.push(t.object);
    entry.props.set(t.predicate, values);
  }
  return subjects;
}

function childList(start: string, subjects: Map<string, Subject>): string[] {
  const out: string[] = [];
  let cursor = start;
  const seen = new Set<string>();
  while (cursor !== RDF_NIL) {
    if (seen.has(cursor)) throw new Error(`child list loops at <${cursor}>`);
    seen.add(cursor);
    const cell = subjects.get(cursor);
    const first = cell?.props.get(RDF_FIRST)?.[0];
    const rest = cell?.props.get(RDF_REST)?.[0];
    if (!first || first.kind !== "iri" || !rest || rest.kind !== "iri") {
      throw new Error(`broken child list at <${cursor}>`);
    }
    out.push(first.value);
    cursor = rest.value;
  }
  return out;
}

/**
 * Project an SBT document into a view model with a deterministic layered
 * layout: one layer per depth, leaves in document order, parents
 * centered over their children. Parse or structure problems come back
 * as a diagnostic state — never a blank panel.
 */
export function renderTree(sbtTurtle: string): TreeRender {
  let triples: Triple[];
  try {
    triples = parseTurtle(sbtTurtle);
  } catch (err) {
    if (err instanceof TurtleError) return { state: "diagnostic", message: err.message };
    throw err;
  }
  const subjects = indexBySubject(triples);

  const roots: string[] = [];
  for (const [id, subject] of subjects) {
    if (subject.types.includes(SBT + "Root")) roots.push(id);
  }
  if (roots.length !== 1) {
    return {
      state: "diagnostic",
      message: roots.length === 0 ? "document has no sbt:Root node" : `document has ${roots.length} root nodes`,
    };
  }

  const nodes: ViewNode[] = [];
  const depths = new Map<string, number>();
  try {
    const walk = (id: string, depth: number, onPath: Set<string>) => {
      if (onPath.has(id)) throw new Error(`node <${id}> is its own ancestor`);
      const subject = subjects.get(id);
      const kind = subject?.types.map((t) => KIND_BY_CLASS.get(t)).find((k) => k !== undefined);
      if (!subject || !kind) throw new Error(`<${id}> is not an SBT node`);
      const labelTerm = subject.props.get(LABEL)?.[0];
      const childHead = subject.props.get(HAS_CHILDREN)?.[0];
      const children = childHead && childHead.kind === "iri" ? childList(childHead.value, subjects) : [];
      depths.set(id, depth);
      nodes.push({
        id,
        kind,
        label: labelTerm?.kind === "literal" ? labelTerm.value : "",
        lastStatus: null,
        children,
        x: 0,
        y: 0,
      });
      const path = new Set(onPath);
      path.add(id);
      for (const child of children) walk(child, depth + 1, path);
    };
    walk(roots[0], 0, new Set());
  } catch (err) {
    return { state: "diagnostic", message: (err as Error).message };
  }

  layout(nodes, roots[0], depths);
  return { state: "ready", model: { rootId: roots[0], nodes } };
}

const X_STEP = 120;
const Y_STEP = 90;

function layout(nodes: ViewNode[], rootId: string, depths: Map<string, number>) {
  const byId = new Map(nodes.map((n) => [n.id, n]));
  let nextSlot = 0;
  const place = (id: string): number => {
    const node = byId.get(id)!;
    node.y = depths.get(id)! * Y_STEP;
    if (node.children.length === 0) {
      node.x = nextSlot * X_STEP;
      nextSlot++;
      return node.x;
    }
    const xs = node.children.map(place);
    node.x = (xs[0] + xs[xs.length - 1]) / 2;
    return node.x;
  };
  place(rootId);
}

/** One entry of a trace frame as the service sends it. */
export interface TraceEntry {
  node: string;
  status: string;
  timestamp?: number;
  kind?: string;
  label?: string;
  error?: string;
}

const KNOWN_STATUS = new Set<string>(["succeeded", "failed", "running"]);

/**
 * Paint tick statuses onto a view model. Pure: returns a new model,
 * leaves the input untouched. Entries naming unknown nodes are skipped
 * with a console warning; replaying the same trace is a no-op.
 */
export function applyTrace(model: TreeViewModel, entries: TraceEntry[]): TreeViewModel {
  const updates = new Map<string, TickStatus>();
  const ids = new Set(model.nodes.map((n) => n.id));
  for (const entry of entries) {
    if (!ids.has(entry.node)) {
      console.warn(`trace entry for unknown node ${entry.node}`);
      continue;
    }
    if (!KNOWN_STATUS.has(entry.status)) {
      console.warn(`trace entry with unknown status "${entry.status}" on ${entry.node}`);
      continue;
    }
    updates.set(entry.node, entry.status as TickStatus);
  }
  return {
    rootId: model.rootId,
    nodes: model.nodes.map((n) => (updates.has(n.id) ? { ...n, lastStatus: updates.get(n.id)! } : n)),
  };
}

/** Border color for a node, or null when it has not ticked yet. */
export function nodeColor(node: ViewNode): string | null {
  return node.lastStatus ? STATUS_COLOR[node.lastStatus] : null;
}
