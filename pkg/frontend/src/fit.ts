/** Least-squares fits used by the convergence plots. */

export interface ExpFit {
  /** rate in err ~ exp(-b * N^(1/3)) */
  b: number;
  /** log-amplitude */
  a: number;
  r2: number;
}

export interface PowerFit {
  slope: number;
  intercept: number;
  r2: number;
}

function leastSquares(x: number[], y: number[]): { c0: number; c1: number; r2: number } {
  const n = x.length;
  if (n < 2) {
    throw new Error("need at least two points for a fit");
  }
  let sx = 0,
    sy = 0,
    sxx = 0,
    sxy = 0;
  for (let i = 0; i < n; i++) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const det = n * sxx - sx * sx;
  const c1 = (n * sxy - sx * sy) / det;
  const c0 = (sy - c1 * sx) / n;
  const mean = sy / n;
  let ssRes = 0,
    ssTot = 0;
  for (let i = 0; i < n; i++) {
    const fit = c0 + c1 * x[i];
    ssRes += (y[i] - fit) ** 2;
    ssTot += (y[i] - mean) ** 2;
  }
  return { c0, c1, r2: ssTot > 0 ? 1 - ssRes / ssTot : 1 };
}

/** Fit ln(err) = a - b * n^(1/3). */
export function fitExponential(n: number[], err: number[]): ExpFit {
  const x = n.map((v) => Math.cbrt(v));
  const y = err.map((v) => Math.log(v));
  const { c0, c1, r2 } = leastSquares(x, y);
  return { a: c0, b: -c1, r2 };
}

/** Fit log10(err) = intercept + slope * log10(n). */
export function fitPowerLaw(n: number[], err: number[]): PowerFit {
  const x = n.map((v) => Math.log10(v));
  const y = err.map((v) => Math.log10(v));
  const { c0, c1, r2 } = leastSquares(x, y);
  return { slope: c1, intercept: c0, r2 };
}
