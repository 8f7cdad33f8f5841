// @vitest-environment happy-dom

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it, vi } from "vitest";

import { TraceCoalescer, treePanel } from "../src/app.js";
import { applyTrace, renderTree } from "../src/tree.js";
import type { TraceEntry } from "../src/tree.js";

// happy-dom swaps the global URL class, so resolve fixtures with node:path
const fixtures = join(dirname(fileURLToPath(import.meta.url)), "fixtures");
const golden = readFileSync(join(fixtures, "canonical-tree.ttl"), "utf8");
const trace: TraceEntry[] = JSON.parse(readFileSync(join(fixtures, "canonical-trace.json"), "utf8"));

describe("treePanel", () => {
  it("draws one box per node and one edge per parent-child pair", () => {
    const panel = treePanel(document, renderTree(golden));
    expect(panel.querySelectorAll("g[data-node]")).toHaveLength(6);
    expect(panel.querySelectorAll("line.edge")).toHaveLength(5);
  });

  it("colors ticked nodes by status", () => {
    const render = renderTree(golden);
    if (render.state !== "ready") throw new Error(render.message);
    const painted = treePanel(document, { state: "ready", model: applyTrace(render.model, trace) });
    const rectFor = (frag: string) =>
      painted
        .querySelector(`g[data-node="http://sbtforge.org/behaviors/canonical#${frag}"]`)!
        .querySelector("rect")!;
    expect(rectFor("condition-4").getAttribute("class")).toContain("border-red");
    expect(rectFor("goalProducer-6").getAttribute("class")).toContain("border-green");
    expect(rectFor("goalProducer-5").getAttribute("class")).not.toContain("border-");
  });

  it("shows diagnostics as text, never a blank panel", () => {
    const panel = treePanel(document, renderTree("not turtle at all ;"));
    expect(panel.className).toBe("diagnostic");
    expect(panel.textContent).toMatch(/Could not render the behavior: line 1/);
  });
});

describe("TraceCoalescer", () => {
  it("batches pushes into one apply per scheduled flush", () => {
    const apply = vi.fn();
    const flushes: Array<() => void> = [];
    const coalescer = new TraceCoalescer(apply, (flush) => flushes.push(flush));

    coalescer.push([{ node: "a", status: "running" }]);
    coalescer.push([
      { node: "a", status: "succeeded" },
      { node: "b", status: "failed" },
    ]);
    expect(apply).not.toHaveBeenCalled();
    expect(flushes).toHaveLength(1); // second push rides the pending flush

    flushes[0]();
    expect(apply).toHaveBeenCalledTimes(1);
    expect(apply.mock.calls[0][0]).toHaveLength(3);

    // the next push schedules a fresh flush
    coalescer.push([{ node: "c", status: "running" }]);
    expect(flushes).toHaveLength(2);
    flushes[1]();
    expect(apply).toHaveBeenCalledTimes(2);
    expect(apply.mock.calls[1][0]).toEqual([{ node: "c", status: "running" }]);
  });

  it("an empty flush does not call apply", () => {
    const apply = vi.fn();
    const coalescer = new TraceCoalescer(apply, () => {});
    coalescer.flush();
    expect(apply).not.toHaveBeenCalled();
  });
});
