/**
 * Page wiring: chat pane with the disambiguation chooser, live tree
 * panel, agent sidebar, and a query box with tabular results. All state
 * lives in the service; this file only projects it.
 */

import { ServiceClient, ServiceError } from "./api.js";
import { emptyChat, receiveFrames, submitChoice, userMessage } from "./chat.js";
import type { ChatViewState, Frame } from "./chat.js";
import { renderChooser } from "./chooser.js";
import { applyTrace, nodeColor, renderTree } from "./tree.js";
import type { TraceEntry, TreeRender, TreeViewModel } from "./tree.js";
import { askText, isAskResult, toTable } from "./table.js";

type Schedule = (flush: () => void) => void;

/**
 * Trace frames can arrive faster than we want to repaint; batch them and
 * apply once per animation frame (or whatever scheduler is injected).
 */
export class TraceCoalescer {
  private buffer: TraceEntry[] = [];
  private scheduled = false;

  constructor(
    private apply: (entries: TraceEntry[]) => void,
    private schedule: Schedule = (flush) => requestAnimationFrame(() => flush()),
  ) {}

  push(entries: TraceEntry[]) {
    this.buffer.push(...entries);
    if (this.scheduled) return;
    this.scheduled = true;
    this.schedule(() => this.flush());
  }

  flush() {
    const batch = this.buffer;
    this.buffer = [];
    this.scheduled = false;
    if (batch.length) this.apply(batch);
  }
}

const NODE_W = 100;
const NODE_H = 36;

/** Paint a view model as SVG; a diagnostic render becomes a text panel. */
export function treePanel(doc: Document, render: TreeRender): HTMLElement {
  if (render.state === "diagnostic") {
    const panel = doc.createElement("div");
    panel.className = "diagnostic";
    panel.textContent = `Could not render the behavior: ${render.message}`;
    return panel;
  }
  return svgPanel(doc, render.model);
}

function svgPanel(doc: Document, model: TreeViewModel): HTMLElement {
  const wrap = doc.createElement("div");
  wrap.className = "tree";
  const SVG = "http://www.w3.org/2000/svg";
  const byId = new Map(model.nodes.map((n) => [n.id, n]));
  const maxX = Math.max(...model.nodes.map((n) => n.x));
  const maxY = Math.max(...model.nodes.map((n) => n.y));
  const svg = doc.createElementNS(SVG, "svg");
  svg.setAttribute("viewBox", `-60 -30 ${maxX + NODE_W + 40} ${maxY + NODE_H + 40}`);

  for (const node of model.nodes) {
    for (const childId of node.children) {
      const child = byId.get(childId)!;
      const edge = doc.createElementNS(SVG, "line");
      edge.setAttribute("x1", String(node.x));
      edge.setAttribute("y1", String(node.y + NODE_H / 2));
      edge.setAttribute("x2", String(child.x));
      edge.setAttribute("y2", String(child.y - NODE_H / 2));
      edge.setAttribute("class", "edge");
      svg.appendChild(edge);
    }
  }
  for (const node of model.nodes) {
    const group = doc.createElementNS(SVG, "g");
    group.setAttribute("data-node", node.id);
    const box = doc.createElementNS(SVG, "rect");
    box.setAttribute("x", String(node.x - NODE_W / 2));
    box.setAttribute("y", String(node.y - NODE_H / 2));
    box.setAttribute("width", String(NODE_W));
    box.setAttribute("height", String(NODE_H));
    const color = nodeColor(node);
    box.setAttribute("class", `node ${node.kind}` + (color ? ` border-${color}` : ""));
    const text = doc.createElementNS(SVG, "text");
    text.setAttribute("x", String(node.x));
    text.setAttribute("y", String(node.y + 4));
    text.setAttribute("text-anchor", "middle");
    text.textContent = node.label || node.kind;
    group.appendChild(box);
    group.appendChild(text);
    svg.appendChild(group);
  }
  wrap.appendChild(svg);
  return wrap;
}

interface AppElements {
  chatLog: HTMLElement;
  chatInput: HTMLInputElement;
  treeHost: HTMLElement;
  agentHost: HTMLElement;
  queryInput: HTMLInputElement;
  resultHost: HTMLElement;
}

export class App {
  private chat: ChatViewState = emptyChat;
  private model: TreeViewModel | null = null;
  private session = `ui-${Math.random().toString(36).slice(2, 10)}`;
  private coalescer: TraceCoalescer;

  constructor(
    private client: ServiceClient,
    private doc: Document,
    private els: AppElements,
  ) {
    this.coalescer = new TraceCoalescer((entries) => {
      if (!this.model) return;
      this.model = applyTrace(this.model, entries);
      this.els.treeHost.replaceChildren(svgPanel(this.doc, this.model));
    });
  }

  async refreshAgents() {
    const agents = await this.client.agents();
    const list = this.doc.createElement("ul");
    for (const agent of agents) {
      const item = this.doc.createElement("li");
      item.textContent = `${agent.name} — ${agent.kb_size} facts, ${agent.goals.length} goals`;
      list.appendChild(item);
    }
    this.els.agentHost.replaceChildren(list);
  }

  async send(text: string) {
    this.chat = userMessage(this.chat, text);
    this.paintChat();
    await this.handleFrames(await this.client.chat({ session: this.session, text }));
  }

  private async handleFrames(frames: Frame[]) {
    this.chat = receiveFrames(this.chat, frames);
    for (const frame of frames) {
      if (frame.type === "trace") {
        this.coalescer.push(frame.entries as TraceEntry[]);
      } else if (frame.type === "answer" && typeof frame.behavior === "string") {
        await this.showBehavior(frame.behavior);
      }
    }
    this.paintChat();
  }

  private async showBehavior(name: string) {
    const render = renderTree(await this.client.behavior(name));
    if (render.state === "ready") this.model = render.model;
    this.els.treeHost.replaceChildren(treePanel(this.doc, render));
  }

  private paintChat() {
    const log = this.doc.createElement("div");
    for (const frame of this.chat.frames) {
      if (frame.type === "trace") continue; // painted on the tree instead
      const line = this.doc.createElement("p");
      line.className = `frame ${frame.type}`;
      line.textContent = `${frame.type === "user" ? "you" : frame.type}: ${(frame as { text: string }).text}`;
      log.appendChild(line);
    }
    if (this.chat.pending) {
      const pending = this.chat.pending;
      log.appendChild(
        renderChooser(this.doc, pending.text, pending.candidates, (index) => void this.choose(index)).element,
      );
    }
    this.els.chatLog.replaceChildren(log);
  }

  private async choose(index: number) {
    const { state, outbound } = submitChoice(this.chat, index);
    this.chat = state;
    await this.handleFrames(await this.client.chat({ session: this.session, ...outbound }));
  }

  async runQuery(agent: string, query: string) {
    try {
      const doc = await this.client.sparql(agent, query);
      if (isAskResult(doc)) {
        const p = this.doc.createElement("p");
        p.textContent = askText(doc);
        this.els.resultHost.replaceChildren(p);
        return;
      }
      const { columns, rows } = toTable(doc);
      const table = this.doc.createElement("table");
      const head = this.doc.createElement("tr");
      for (const column of columns) {
        const th = this.doc.createElement("th");
        th.textContent = column;
        head.appendChild(th);
      }
      table.appendChild(head);
      for (const row of rows) {
        const tr = this.doc.createElement("tr");
        for (const value of row) {
          const td = this.doc.createElement("td");
          td.textContent = value;
          tr.appendChild(td);
        }
        table.appendChild(tr);
      }
      this.els.resultHost.replaceChildren(table);
    } catch (err) {
      const panel = this.doc.createElement("pre");
      panel.className = "diagnostic";
      panel.textContent = err instanceof ServiceError ? err.message : String(err);
      this.els.resultHost.replaceChildren(panel);
    }
  }
}

export function mount(doc: Document, base: string) {
  const byId = (id: string) => doc.getElementById(id) as HTMLElement;
  const app = new App(new ServiceClient(base), doc, {
    chatLog: byId("chat-log"),
    chatInput: byId("chat-input") as HTMLInputElement,
    treeHost: byId("tree"),
    agentHost: byId("agents"),
    queryInput: byId("query-input") as HTMLInputElement,
    resultHost: byId("results"),
  });
  const chatInput = byId("chat-input") as HTMLInputElement;
  chatInput.addEventListener("keydown", (event: KeyboardEvent) => {
    if (event.key === "Enter" && chatInput.value.trim()) {
      void app.send(chatInput.value.trim());
      chatInput.value = "";
    }
  });
  const queryInput = byId("query-input") as HTMLInputElement;
  queryInput.addEventListener("keydown", (event: KeyboardEvent) => {
    if (event.key === "Enter" && queryInput.value.trim()) {
      void app.runQuery("blocksworld", queryInput.value.trim());
    }
  });
  void app.refreshAgents();
  return app;
}
