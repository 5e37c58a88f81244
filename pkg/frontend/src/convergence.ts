/** Convergence figures: error / estimator against degrees of freedom. */

import { RunRow } from "./csv.js";
import { ExpFit, fitExponential, fitPowerLaw } from "./fit.js";
import { PALETTE, SvgDoc, decadeTicks, linearTicks } from "./svg.js";

export interface Curve {
  label: string;
  n: number[];
  values: number[];
}

export interface ConvergenceOptions {
  /** "exp": log values against N^(1/3); "loglog": against log N. */
  axes?: "exp" | "loglog";
  fitExp?: boolean;
  title?: string;
  width?: number;
  height?: number;
}

export interface ConvergenceResult {
  svg: string;
  fits: Array<{ label: string; fit: ExpFit }>;
}

/** Error curve of a run: the true error when recorded, else the estimator
 * (the estimator-only benchmark has no exact solution). */
export function curveFromRows(label: string, rows: RunRow[]): Curve {
  const n = rows.map((r) => r.nDof);
  const values = rows.map((r) => (r.errGrad !== null ? r.errGrad : r.etaTotal));
  return { label, n, values };
}

export function estimatorCurve(label: string, rows: RunRow[]): Curve {
  return { label, n: rows.map((r) => r.nDof), values: rows.map((r) => r.etaTotal) };
}

export function renderConvergence(
  curves: Curve[],
  options: ConvergenceOptions = {},
): ConvergenceResult {
  if (curves.length === 0) {
    throw new Error("no curves to plot");
  }
  for (const c of curves) {
    if (c.n.length < 2) {
      throw new Error(`curve "${c.label}" needs at least two rows`);
    }
    if (c.values.some((v) => !(v > 0))) {
      throw new Error(`curve "${c.label}" has non-positive values`);
    }
  }
  const axes = options.axes ?? "exp";
  const width = options.width ?? 640;
  const height = options.height ?? 440;
  const margin = { left: 68, right: 16, top: 30, bottom: 46 };

  const xOf = (n: number) => (axes === "exp" ? Math.cbrt(n) : Math.log10(n));
  const allX = curves.flatMap((c) => c.n.map(xOf));
  const allY = curves.flatMap((c) => c.values.map(Math.log10));
  const x0 = Math.min(...allX);
  const x1 = Math.max(...allX);
  const y0 = Math.min(...allY);
  const y1 = Math.max(...allY);
  const padX = 0.04 * (x1 - x0 || 1);
  const padY = 0.06 * (y1 - y0 || 1);
  const sx = (v: number) =>
    margin.left +
    ((v - x0 + padX) / (x1 - x0 + 2 * padX)) * (width - margin.left - margin.right);
  const sy = (v: number) =>
    height -
    margin.bottom -
    ((v - y0 + padY) / (y1 - y0 + 2 * padY)) * (height - margin.top - margin.bottom);

  const doc = new SvgDoc(width, height);
  const axisStyle = 'stroke="black" stroke-width="1"';
  doc.line(margin.left, height - margin.bottom, width - margin.right, height - margin.bottom, axisStyle);
  doc.line(margin.left, margin.top, margin.left, height - margin.bottom, axisStyle);

  for (const tick of decadeTicks(Math.pow(10, y0), Math.pow(10, y1))) {
    const y = sy(Math.log10(tick));
    doc.line(margin.left - 4, y, margin.left, y, axisStyle);
    doc.text(margin.left - 8, y + 3, `1e${Math.round(Math.log10(tick))}`, 'text-anchor="end"');
    doc.line(margin.left, y, width - margin.right, y, 'stroke="#dddddd" stroke-width="0.5"');
  }
  const xticks = axes === "exp" ? linearTicks(x0, x1) : decadeTicks(Math.pow(10, x0), Math.pow(10, x1)).map(Math.log10);
  for (const t of xticks) {
    const x = sx(t);
    doc.line(x, height - margin.bottom, x, height - margin.bottom + 4, axisStyle);
    const label = axes === "exp" ? t.toFixed(0) : `1e${Math.round(t)}`;
    doc.text(x, height - margin.bottom + 16, label, 'text-anchor="middle"');
  }
  doc.text(
    (margin.left + width - margin.right) / 2,
    height - 12,
    axes === "exp" ? "DOF^(1/3)" : "DOF",
    'text-anchor="middle"',
  );
  doc.raw(
    `<text x="16" y="${(margin.top + height - margin.bottom) / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${(margin.top + height - margin.bottom) / 2})">error / estimator</text>`,
  );
  if (options.title) {
    doc.text(width / 2, 18, options.title, 'text-anchor="middle" font-size="13"');
  }

  const fits: Array<{ label: string; fit: ExpFit }> = [];
  curves.forEach((curve, ci) => {
    const color = PALETTE[ci % PALETTE.length];
    const pts = curve.n.map(
      (n, i) => [sx(xOf(n)), sy(Math.log10(curve.values[i]))] as [number, number],
    );
    doc.polyline(pts, `stroke="${color}" stroke-width="1.6"`);
    for (const [x, y] of pts) {
      doc.circle(x, y, 2.4, `fill="${color}"`);
    }
    if (options.fitExp) {
      const fit = fitExponential(curve.n, curve.values);
      fits.push({ label: curve.label, fit });
      const ends = [curve.n[0], curve.n[curve.n.length - 1]].map((n) => {
        const ln = fit.a - fit.b * Math.cbrt(n);
        return [sx(xOf(n)), sy(ln / Math.LN10)] as [number, number];
      });
      doc.polyline(ends, `stroke="${color}" stroke-width="1" stroke-dasharray="5,4"`);
    }
  });

  curves.forEach((curve, ci) => {
    const color = PALETTE[ci % PALETTE.length];
    const y = margin.top + 14 * ci + 6;
    const x = width - margin.right - 190;
    doc.line(x, y - 3, x + 18, y - 3, `stroke="${color}" stroke-width="2"`);
    const fit = fits.find((f) => f.label === curve.label);
    const suffix = fit ? `  (b=${fit.fit.b.toFixed(3)})` : "";
    doc.text(x + 24, y, curve.label + suffix);
  });

  return { svg: doc.render(), fits };
}
