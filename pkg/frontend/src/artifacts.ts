/** Read-only access to a pmefront artifact directory.
 *
 * An artifact directory is only accepted when it carries manifest.json;
 * CSV files are parsed against their fixed headers and any deviation is a
 * SchemaMismatch. Nothing in here ever writes into the directory.
 */

import { existsSync, readFileSync, readdirSync } from "fs";
import { join } from "path";
import Papa from "papaparse";

import { MissingArtifact, SchemaMismatch } from "./errors.js";

export interface FrontRow {
  t: number;
  idx: number;
  x: number;
  y?: number;
  speed: number;
  grad_v: number;
}

export interface EnergyRow {
  t: number;
  I0: number;
  I1: number;
  I2: number;
}

export interface FicheraReport {
  boundary_idx: number[];
  q1: number[];
  q2: number[];
  q3: number[];
  q4: number[];
  tol_zero: number;
  tol_strict: number;
  scale: number;
  verdicts: Record<string, boolean>;
  classification: string;
}

export class ArtifactDir {
  constructor(readonly dir: string) {
    if (!existsSync(join(dir, "manifest.json"))) {
      throw new MissingArtifact(
        `${dir} is not an artifact directory (no manifest.json)`,
      );
    }
  }

  /** File names, for mutation checks in tests. */
  listing(): string[] {
    return readdirSync(this.dir).sort();
  }

  readJson<T>(name: string): T {
    const path = join(this.dir, name);
    if (!existsSync(path)) {
      throw new MissingArtifact(`${this.dir} has no ${name}`);
    }
    return JSON.parse(readFileSync(path, "utf-8")) as T;
  }

  resolvedConfig(): Record<string, any> {
    // the resolved config is YAML written by the run; the subset needed
    // here (problem.m, problem.t0) is parsed line-wise to avoid a YAML
    // dependency for two scalar lookups
    const path = join(this.dir, "resolved-config");
    if (!existsSync(path)) {
      throw new MissingArtifact(`${this.dir} has no resolved-config`);
    }
    const text = readFileSync(path, "utf-8");
    const grab = (key: string): number | undefined => {
      const match = text.match(new RegExp(`^\\s*${key}:\\s*([-0-9.eE+]+)`, "m"));
      return match ? Number(match[1]) : undefined;
    };
    return { m: grab("m"), t0: grab("t0"), nx: grab("nx"), T: grab("T") };
  }

  private csvRows(name: string, header: string[]): Record<string, number>[] {
    const path = join(this.dir, name);
    if (!existsSync(path)) {
      throw new MissingArtifact(`${this.dir} has no ${name}`);
    }
    const parsed = Papa.parse<Record<string, string>>(
      readFileSync(path, "utf-8").trim(),
      { header: true, dynamicTyping: false, skipEmptyLines: true },
    );
    const fields = parsed.meta.fields ?? [];
    for (const col of header) {
      if (!fields.includes(col)) {
        throw new SchemaMismatch(
          `${name}: expected column ${col}, found [${fields.join(", ")}]`,
        );
      }
    }
    return parsed.data.map((row) => {
      const out: Record<string, number> = {};
      for (const field of fields) {
        const value = Number(row[field]);
        if (!Number.isFinite(value)) {
          throw new SchemaMismatch(`${name}: non-numeric entry in ${field}`);
        }
        out[field] = value;
      }
      return out;
    });
  }

  front(): FrontRow[] {
    const rows = this.csvRows("front.csv", ["t", "idx", "x", "speed", "grad_v"]);
    return rows as unknown as FrontRow[];
  }

  energy(): EnergyRow[] {
    return this.csvRows("energy.csv", ["t", "I0", "I1", "I2"]) as unknown as EnergyRow[];
  }

  fichera(): FicheraReport {
    return this.readJson<FicheraReport>("fichera.json");
  }

  /** Final field snapshot (largest index) as (coordinate, value) pairs. */
  finalSnapshot(prefix: string): { x: number[]; value: number[] } {
    const names = this.listing().filter(
      (n) => n.startsWith(prefix) && n.endsWith(".csv"),
    );
    if (names.length === 0) {
      throw new MissingArtifact(`${this.dir} has no ${prefix}*.csv snapshots`);
    }
    const rows = this.csvRows(names[names.length - 1], ["idx", "x0", "value"]);
    return {
      x: rows.map((r) => r.x0),
      value: rows.map((r) => r.value),
    };
  }
}

/** Group front rows by output time, ordered by time. */
export function frontByTime(rows: FrontRow[]): Map<number, FrontRow[]> {
  const grouped = new Map<number, FrontRow[]>();
  for (const row of rows) {
    const bucket = grouped.get(row.t);
    if (bucket) {
      bucket.push(row);
    } else {
      grouped.set(row.t, [row]);
    }
  }
  return new Map([...grouped.entries()].sort((a, b) => a[0] - b[0]));
}
