#!/usr/bin/env node
/** CLI: pmefront-plots --artifacts DIR --kind KIND --out FILE.svg
 *
 * Reads a pmefront artifact directory (read-only), writes the figure and a
 * JSON sidecar (same path with .json) carrying the fitted quantities.
 * Nothing is written on failure. Exit codes: 0 ok, 1 usage, 2 missing
 * artifact, 3 schema mismatch.
 */

import { writeFileSync } from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { MissingArtifact, SchemaMismatch } from "./errors.js";
import { PlotKind, producePlot } from "./kinds.js";

const KINDS: PlotKind[] = [
  "front",
  "exponent-fit",
  "convergence",
  "fichera-profile",
  "energy",
];

export function sidecarPath(out: string): string {
  return out.replace(/\.svg$/i, "") + ".json";
}

export function main(argv: string[]): number {
  const args = yargs(argv)
    .option("artifacts", { type: "string", demandOption: true })
    .option("kind", { type: "string", demandOption: true, choices: KINDS })
    .option("out", { type: "string", demandOption: true })
    .strict()
    .exitProcess(false)
    .parseSync();

  try {
    const result = producePlot(args.kind as PlotKind, args.artifacts);
    // compute everything first, then write: no partial images on failure
    writeFileSync(args.out, result.svg);
    writeFileSync(
      sidecarPath(args.out),
      JSON.stringify(result.sidecar, null, 1) + "\n",
    );
    console.log(`wrote ${args.out} and ${sidecarPath(args.out)}`);
    return 0;
  } catch (err) {
    if (err instanceof MissingArtifact) {
      console.error(`missing-artifact: ${err.message}`);
      return 2;
    }
    if (err instanceof SchemaMismatch) {
      console.error(`schema-mismatch: ${err.message}`);
      return 3;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("index.js")) {
  process.exit(main(hideBin(process.argv)));
}
