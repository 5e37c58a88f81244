import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { EXPECTED_HEADER, parseRunCsv } from "../src/csv.js";

const FIXTURE = new URL("./fixtures/smoke_square.csv", import.meta.url).pathname;

describe("run table parsing", () => {
  it("parses the golden fixture", () => {
    const rows = parseRunCsv(readFileSync(FIXTURE, "utf8"), "smoke");
    expect(rows.length).toBe(4); // levels 0..3
    expect(rows[0].level).toBe(0);
    expect(rows[0].nDof).toBeGreaterThan(0);
    expect(rows[0].errGrad).not.toBeNull();
    expect(rows[0].etaResidual).toBeNull(); // toggle was off in the fixture run
  });

  it("rejects unknown headers", () => {
    const bogus = "level,foo\n0,1\n";
    expect(() => parseRunCsv(bogus)).toThrow(/unexpected header/);
  });

  it("rejects a reordered header", () => {
    const text = readFileSync(FIXTURE, "utf8");
    const lines = text.split("\n");
    const cols = lines[0].split(",");
    [cols[0], cols[1]] = [cols[1], cols[0]];
    lines[0] = cols.join(",");
    expect(() => parseRunCsv(lines.join("\n"))).toThrow(/unexpected header/);
  });

  it("rejects empty tables", () => {
    expect(() => parseRunCsv(EXPECTED_HEADER.join(","))).toThrow(/no data rows/);
  });

  it("rejects malformed numbers with a line reference", () => {
    const text = readFileSync(FIXTURE, "utf8").replace(/^0,8,/m, "0,eight,");
    expect(() => parseRunCsv(text)).toThrow(/line 2/);
  });
});
