/** Parsing of the benchmark harness CSV (one adaptive run per file). */

export const EXPECTED_HEADER = [
  "level",
  "n_elements",
  "n_dof",
  "eta_total",
  "eta_flux",
  "eta_vol",
  "eta_bnd",
  "eta_noncf",
  "osc_f",
  "osc_g",
  "err_grad",
  "err_l2",
  "err_bnd",
  "eff_index",
  "eta_residual",
  "wall_time_s",
] as const;

export interface RunRow {
  level: number;
  nElements: number;
  nDof: number;
  etaTotal: number;
  etaFlux: number;
  etaVol: number;
  etaBnd: number;
  etaNoncf: number;
  oscF: number;
  oscG: number;
  errGrad: number | null;
  errL2: number | null;
  errBnd: number | null;
  effIndex: number | null;
  etaResidual: number | null;
  wallTimeS: number;
}

function requireNumber(raw: string, column: string, line: number): number {
  const v = Number(raw);
  if (raw.trim() === "" || !Number.isFinite(v)) {
    throw new Error(`line ${line}: column ${column} is not a number: ${JSON.stringify(raw)}`);
  }
  return v;
}

function optionalNumber(raw: string): number | null {
  return raw.trim() === "" ? null : Number(raw);
}

export function parseRunCsv(text: string, source = "<csv>"): RunRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new Error(`${source}: empty table`);
  }
  const header = lines[0].split(",");
  if (
    header.length !== EXPECTED_HEADER.length ||
    header.some((h, i) => h !== EXPECTED_HEADER[i])
  ) {
    throw new Error(
      `${source}: unexpected header; wanted "${EXPECTED_HEADER.join(",")}"`,
    );
  }
  const rows: RunRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== EXPECTED_HEADER.length) {
      throw new Error(`${source}: line ${i + 1}: wrong column count`);
    }
    rows.push({
      level: requireNumber(parts[0], "level", i + 1),
      nElements: requireNumber(parts[1], "n_elements", i + 1),
      nDof: requireNumber(parts[2], "n_dof", i + 1),
      etaTotal: requireNumber(parts[3], "eta_total", i + 1),
      etaFlux: requireNumber(parts[4], "eta_flux", i + 1),
      etaVol: requireNumber(parts[5], "eta_vol", i + 1),
      etaBnd: requireNumber(parts[6], "eta_bnd", i + 1),
      etaNoncf: requireNumber(parts[7], "eta_noncf", i + 1),
      oscF: requireNumber(parts[8], "osc_f", i + 1),
      oscG: requireNumber(parts[9], "osc_g", i + 1),
      errGrad: optionalNumber(parts[10]),
      errL2: optionalNumber(parts[11]),
      errBnd: optionalNumber(parts[12]),
      effIndex: optionalNumber(parts[13]),
      etaResidual: optionalNumber(parts[14]),
      wallTimeS: requireNumber(parts[15], "wall_time_s", i + 1),
    });
  }
  if (rows.length === 0) {
    throw new Error(`${source}: no data rows`);
  }
  return rows;
}
