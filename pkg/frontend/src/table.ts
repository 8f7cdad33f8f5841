/** SPARQL JSON results → something a table component can render. */

import type { SparqlJson } from "./api.js";

export interface ResultTable {
  columns: string[];
  rows: string[][];
}

export function isAskResult(doc: SparqlJson): boolean {
  return typeof doc.boolean === "boolean";
}

export function askText(doc: SparqlJson): string {
  return doc.boolean ? "yes" : "no";
}

function cell(binding: { type: string; value: string } | undefined): string {
  if (!binding) return "";
  // IRIs shown by their local name; literals verbatim
  if (binding.type === "uri") {
    const cut = Math.max(binding.value.lastIndexOf("#"), binding.value.lastIndexOf("/"));
    return cut >= 0 ? binding.value.slice(cut + 1) : binding.value;
  }
  return binding.value;
}

export function toTable(doc: SparqlJson): ResultTable {
  const columns = doc.head.vars ?? [];
  const rows = (doc.results?.bindings ?? []).map((binding) => columns.map((v) => cell(binding[v])));
  return { columns, rows };
}
