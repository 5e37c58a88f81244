/** Mesh snapshot figures: triangles shaded by polynomial degree. */

import { SvgDoc, degreeColor } from "./svg.js";

export interface MeshSnapshot {
  nodes: Array<[number, number]>;
  tris: Array<[number, number, number]>;
  degrees: number[];
}

export function parseMeshSnapshot(text: string, source = "<mesh>"): MeshSnapshot {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  let cursor = 0;
  const fail = (msg: string): never => {
    throw new Error(`${source}: line ${cursor + 1}: ${msg}`);
  };
  if (lines.length === 0 || !lines[0].startsWith("helmdg-mesh")) {
    fail("missing 'helmdg-mesh' header");
  }
  cursor = 1;
  const nodeHead = lines[cursor]?.split(/\s+/) ?? [];
  if (nodeHead[0] !== "nodes") fail("expected 'nodes <count>'");
  const nNodes = Number(nodeHead[1]);
  if (!Number.isInteger(nNodes) || nNodes <= 0) fail("bad node count");
  const nodes: Array<[number, number]> = [];
  for (let i = 0; i < nNodes; i++) {
    cursor = 2 + i;
    const parts = (lines[cursor] ?? "").split(/\s+/).map(Number);
    if (parts.length !== 2 || parts.some((v) => !Number.isFinite(v))) {
      fail("expected 'x y'");
    }
    nodes.push([parts[0], parts[1]]);
  }
  cursor = 2 + nNodes;
  const triHead = lines[cursor]?.split(/\s+/) ?? [];
  if (triHead[0] !== "triangles") fail("expected 'triangles <count>'");
  const nTris = Number(triHead[1]);
  if (!Number.isInteger(nTris) || nTris <= 0) fail("bad triangle count");
  const tris: Array<[number, number, number]> = [];
  const degrees: number[] = [];
  for (let i = 0; i < nTris; i++) {
    cursor = 3 + nNodes + i;
    const parts = (lines[cursor] ?? "").split(/\s+/).map(Number);
    if (parts.length !== 4 || parts.some((v) => !Number.isInteger(v))) {
      fail("expected 'a b c degree'");
    }
    const [a, b, c, p] = parts;
    if ([a, b, c].some((v) => v < 0 || v >= nNodes)) fail("vertex index out of range");
    tris.push([a, b, c]);
    degrees.push(p);
  }
  return { nodes, tris, degrees };
}

export interface MeshRenderResult {
  svg: string;
  histogram: Map<number, number>;
}

export function renderMesh(
  mesh: MeshSnapshot,
  options: { width?: number; title?: string } = {},
): MeshRenderResult {
  const width = options.width ?? 560;
  const legendWidth = 110;
  const xs = mesh.nodes.map((n) => n[0]);
  const ys = mesh.nodes.map((n) => n[1]);
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  const y0 = Math.min(...ys);
  const y1 = Math.max(...ys);
  const plotW = width - legendWidth - 20;
  const scale = plotW / (x1 - x0);
  const height = Math.ceil((y1 - y0) * scale) + 40;
  const sx = (x: number) => 10 + (x - x0) * scale;
  const sy = (y: number) => height - 20 - (y - y0) * scale;

  const histogram = new Map<number, number>();
  for (const p of mesh.degrees) {
    histogram.set(p, (histogram.get(p) ?? 0) + 1);
  }
  const degs = [...histogram.keys()].sort((a, b) => a - b);
  const pMin = degs[0];
  const pMax = degs[degs.length - 1];
  const shade = (p: number) =>
    degreeColor(pMax > pMin ? (p - pMin) / (pMax - pMin) : 0.5);

  const doc = new SvgDoc(width, height);
  mesh.tris.forEach(([a, b, c], t) => {
    const pts = [mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]].map(
      ([x, y]) => [sx(x), sy(y)] as [number, number],
    );
    doc.polygon(
      pts,
      `fill="${shade(mesh.degrees[t])}" stroke="black" stroke-width="0.35"`,
    );
  });

  const lx = width - legendWidth;
  doc.text(lx, 24, "degree (count)", 'font-size="12"');
  degs.forEach((p, i) => {
    const y = 38 + 16 * i;
    doc.raw(
      `<rect x="${lx}" y="${y - 10}" width="12" height="12" fill="${shade(p)}" stroke="black" stroke-width="0.4"/>`,
    );
    doc.text(lx + 18, y, `p=${p} (${histogram.get(p)})`);
  });
  if (options.title) {
    doc.text(10, 14, options.title, 'font-size="13"');
  }
  return { svg: doc.render(), histogram };
}
