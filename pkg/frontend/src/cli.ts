#!/usr/bin/env node
/**
 * Figure renderer for helmdg benchmark outputs.
 *
 * Usage:
 *   helmdg-plot convergence run1.csv [run2.csv ...] --out fig.svg [--fit-exp] [--loglog]
 *   helmdg-plot mesh snapshot.mesh --out mesh.svg
 *
 * A leading "plot" token is accepted, so `helmdg-plot plot mesh ...` also works.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";

import { curveFromRows, renderConvergence } from "./convergence.js";
import { parseRunCsv } from "./csv.js";
import { parseMeshSnapshot, renderMesh } from "./meshplot.js";

interface Parsed {
  command: string;
  inputs: string[];
  out: string;
  fitExp: boolean;
  loglog: boolean;
}

export function parseArgs(argv: string[]): Parsed {
  const args = [...argv];
  if (args[0] === "plot") {
    args.shift();
  }
  const command = args.shift() ?? "";
  if (command !== "convergence" && command !== "mesh") {
    throw new Error("usage: helmdg-plot {convergence|mesh} <inputs...> --out FILE");
  }
  const inputs: string[] = [];
  let out = "";
  let fitExp = false;
  let loglog = false;
  for (let i = 0; i < args.length; i++) {
    const a = args[i];
    if (a === "--out") {
      out = args[++i] ?? "";
    } else if (a === "--fit-exp") {
      fitExp = true;
    } else if (a === "--loglog") {
      loglog = true;
    } else if (a.startsWith("--")) {
      throw new Error(`unknown flag ${a}`);
    } else {
      inputs.push(a);
    }
  }
  if (inputs.length === 0) {
    throw new Error("no input files given");
  }
  if (!out) {
    out = command === "mesh" ? "mesh.svg" : "convergence.svg";
  }
  return { command, inputs, out, fitExp, loglog };
}

export function runCli(argv: string[], log: (s: string) => void = console.log): string {
  const parsed = parseArgs(argv);
  if (parsed.command === "convergence") {
    const curves = parsed.inputs.map((path) => {
      const rows = parseRunCsv(readFileSync(path, "utf8"), path);
      return curveFromRows(basename(path).replace(/\.csv$/, ""), rows);
    });
    const { svg, fits } = renderConvergence(curves, {
      axes: parsed.loglog ? "loglog" : "exp",
      fitExp: parsed.fitExp,
    });
    writeFileSync(parsed.out, svg);
    for (const { label, fit } of fits) {
      log(`${label}: b = ${fit.b.toFixed(6)} (R^2 = ${fit.r2.toFixed(4)})`);
    }
    log(`wrote ${parsed.out}`);
    return parsed.out;
  }
  if (parsed.inputs.length !== 1) {
    throw new Error("mesh rendering takes exactly one snapshot file");
  }
  const mesh = parseMeshSnapshot(readFileSync(parsed.inputs[0], "utf8"), parsed.inputs[0]);
  const { svg, histogram } = renderMesh(mesh, { title: basename(parsed.inputs[0]) });
  writeFileSync(parsed.out, svg);
  const summary = [...histogram.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([p, c]) => `p=${p}:${c}`)
    .join(" ");
  log(`degrees ${summary}`);
  log(`wrote ${parsed.out}`);
  return parsed.out;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;

if (invokedDirectly) {
  try {
    runCli(process.argv.slice(2));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    process.exit(2);
  }
}
