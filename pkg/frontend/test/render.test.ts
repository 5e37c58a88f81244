import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { runCli } from "../src/cli.js";
import { curveFromRows, renderConvergence } from "../src/convergence.js";
import { parseRunCsv } from "../src/csv.js";
import { parseMeshSnapshot, renderMesh } from "../src/meshplot.js";

const SMOKE = new URL("./fixtures/smoke_square.csv", import.meta.url).pathname;
const LSHAPE = new URL("./fixtures/lshape_k10_hp.csv", import.meta.url).pathname;
const MESH = new URL("./fixtures/lshape_k10_hp.mesh", import.meta.url).pathname;
const SMOKE_MESH = new URL("./fixtures/smoke_square.mesh", import.meta.url).pathname;

describe("convergence rendering", () => {
  it("renders a single smoke curve", () => {
    const rows = parseRunCsv(readFileSync(SMOKE, "utf8"));
    const { svg } = renderConvergence([curveFromRows("smoke", rows)]);
    expect(svg).toContain("<svg");
    expect(svg).toContain("polyline");
    expect(svg).toContain("DOF^(1/3)");
  });

  it("renders two curves with exponential fits", () => {
    const a = curveFromRows("smoke", parseRunCsv(readFileSync(SMOKE, "utf8")));
    const b = curveFromRows("lshape", parseRunCsv(readFileSync(LSHAPE, "utf8")));
    const { svg, fits } = renderConvergence([a, b], { fitExp: true });
    expect(fits.length).toBe(2);
    expect(svg.match(/stroke-dasharray/g)?.length).toBe(2);
  });

  it("supports log-log axes", () => {
    const rows = parseRunCsv(readFileSync(LSHAPE, "utf8"));
    const { svg } = renderConvergence([curveFromRows("lshape", rows)], {
      axes: "loglog",
    });
    expect(svg).toContain(">DOF</text>");
  });

  it("errors on empty input", () => {
    expect(() => renderConvergence([])).toThrow(/no curves/);
  });

  it("rerendering is byte-identical (no timestamps)", () => {
    const rows = parseRunCsv(readFileSync(LSHAPE, "utf8"));
    const one = renderConvergence([curveFromRows("x", rows)]).svg;
    const two = renderConvergence([curveFromRows("x", rows)]).svg;
    expect(one).toBe(two);
  });
});

describe("mesh rendering", () => {
  it("parses and renders the refined L-shape snapshot", () => {
    const mesh = parseMeshSnapshot(readFileSync(MESH, "utf8"));
    const { svg, histogram } = renderMesh(mesh);
    expect(svg).toContain("<polygon");
    // legend histogram matches a recount of the snapshot degrees
    const recount = new Map<number, number>();
    for (const p of mesh.degrees) recount.set(p, (recount.get(p) ?? 0) + 1);
    expect([...histogram.entries()].sort()).toEqual([...recount.entries()].sort());
    // adaptive run: refinement concentrated near the re-entrant corner
    expect(new Set(mesh.degrees).size).toBeGreaterThan(1);
  });

  it("uniform-degree snapshot produces a single legend entry", () => {
    const mesh = parseMeshSnapshot(readFileSync(SMOKE_MESH, "utf8"));
    const distinct = new Set(mesh.degrees);
    if (distinct.size === 1) {
      const { histogram } = renderMesh(mesh);
      expect(histogram.size).toBe(1);
    }
  });

  it("reports malformed snapshots with line numbers", () => {
    expect(() => parseMeshSnapshot("helmdg-mesh 1\nnodes 2\n0 0\n")).toThrow(/line 4/);
    expect(() => parseMeshSnapshot("nope")).toThrow(/header/);
  });
});

describe("cli", () => {
  it("plot convergence writes a file and prints the fitted rate", () => {
    const dir = mkdtempSync(join(tmpdir(), "helmdg-plot-"));
    const out = join(dir, "conv.svg");
    const logs: string[] = [];
    runCli(["plot", "convergence", LSHAPE, "--out", out, "--fit-exp"], (s) =>
      logs.push(s),
    );
    expect(readFileSync(out, "utf8")).toContain("<svg");
    expect(logs.some((l) => /b = 0\.\d+/.test(l))).toBe(true);
  });

  it("plot mesh writes a file", () => {
    const dir = mkdtempSync(join(tmpdir(), "helmdg-plot-"));
    const out = join(dir, "mesh.svg");
    const logs: string[] = [];
    runCli(["mesh", MESH, "--out", out], (s) => logs.push(s));
    expect(readFileSync(out, "utf8")).toContain("<polygon");
    expect(logs.some((l) => l.startsWith("degrees"))).toBe(true);
  });

  it("rejects unknown flags", () => {
    expect(() => runCli(["convergence", LSHAPE, "--wat"])).toThrow(/unknown flag/);
  });

  it("refuses to run without inputs", () => {
    expect(() => runCli(["convergence"])).toThrow(/no input files/);
  });
});
