/** Thin typed client over the service's HTTP surface. */

import type { Frame } from "./chat.js";

export interface AgentOverview {
  name: string;
  uri: string;
  template: string;
  endpoints: string[];
  goals: string[];
  kb_size: number;
  queued_events: number;
  running_behaviors: string[];
  last_status: string | null;
}

export interface AgentDetail extends AgentOverview {
  trace: Array<{ node: string; status: string; kind: string; label: string }>;
}

export interface SparqlJson {
  head: { vars?: string[] };
  boolean?: boolean;
  results?: { bindings: Array<Record<string, { type: string; value: string }>> };
}

export type ChatPayload =
  | { session: string; mode?: string; text: string }
  | { session: string; mode?: string; choice: number };

export class ServiceError extends Error {
  status: number;

  constructor(status: number, body: string) {
    super(body || `HTTP ${status}`);
    this.status = status;
  }
}

async function ok(response: Response): Promise<Response> {
  if (!response.ok) throw new ServiceError(response.status, await response.text());
  return response;
}

export class ServiceClient {
  constructor(readonly base: string) {}

  async agents(): Promise<AgentOverview[]> {
    return (await ok(await fetch(`${this.base}/agents`))).json();
  }

  async agent(name: string): Promise<AgentDetail> {
    return (await ok(await fetch(`${this.base}/agents/${name}`))).json();
  }

  async behaviors(): Promise<string[]> {
    const doc = await (await ok(await fetch(`${this.base}/behaviors`))).json();
    return doc.behaviors;
  }

  /** Behavior document as Turtle text, ready for renderTree. */
  async behavior(name: string): Promise<string> {
    return (await ok(await fetch(`${this.base}/behaviors/${name}`))).text();
  }

  /** SPARQL over an agent's knowledge base; errors carry the server's
   * verbatim parser message. */
  async sparql(agent: string, query: string): Promise<SparqlJson> {
    const url = `${this.base}/agents/${agent}/sparql?query=${encodeURIComponent(query)}`;
    return (await ok(await fetch(url))).json();
  }

  async chat(payload: ChatPayload): Promise<Frame[]> {
    const response = await ok(
      await fetch(`${this.base}/chat`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
    return (await response.json()).frames;
  }
}
