import { describe, expect, it } from "vitest";

import { askText, isAskResult, toTable } from "../src/table.js";
import type { SparqlJson } from "../src/api.js";

describe("result tables", () => {
  it("keeps variable order and shows IRIs by local name", () => {
    const doc: SparqlJson = {
      head: { vars: ["block", "where"] },
      results: {
        bindings: [
          {
            block: { type: "uri", value: "http://sbtforge.org/bw#blueBlock" },
            where: { type: "literal", value: "table" },
          },
          { block: { type: "uri", value: "urn:path/redBlock" } }, // unbound ?where
        ],
      },
    };
    expect(toTable(doc)).toEqual({
      columns: ["block", "where"],
      rows: [
        ["blueBlock", "table"],
        ["redBlock", ""],
      ],
    });
  });

  it("handles empty result sets", () => {
    expect(toTable({ head: { vars: ["x"] } })).toEqual({ columns: ["x"], rows: [] });
    expect(toTable({ head: {} })).toEqual({ columns: [], rows: [] });
  });

  it("recognizes ASK responses", () => {
    expect(isAskResult({ head: {}, boolean: true })).toBe(true);
    expect(isAskResult({ head: { vars: [] } })).toBe(false);
    expect(askText({ head: {}, boolean: true })).toBe("yes");
    expect(askText({ head: {}, boolean: false })).toBe("no");
  });
});
