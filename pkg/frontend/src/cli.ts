#!/usr/bin/env node
/**
 * metricdrift-plots render --spec <spec.json>
 *
 * Reads aggregate CSVs named by the spec and writes the three-panel SVG
 * figure plus one standalone SVG per panel. Exits nonzero with a
 * column-naming diagnostic on schema violations.
 */

import { resolve } from "path";
import { fileURLToPath } from "url";

import { loadSpec, render, SchemaError, SpecError } from "./render.js";

export function main(argv: string[]): number {
  const args = [...argv];
  if (args[0] !== "render") {
    console.error("usage: metricdrift-plots render --spec <spec.json>");
    return 2;
  }
  const specIdx = args.indexOf("--spec");
  if (specIdx < 0 || specIdx + 1 >= args.length) {
    console.error("render: missing required --spec <spec.json>");
    return 2;
  }
  try {
    const result = render(loadSpec(args[specIdx + 1]));
    console.log(`wrote ${result.combined}`);
    for (const p of result.panels) {
      console.log(`wrote ${p}`);
    }
    return 0;
  } catch (e) {
    if (e instanceof SchemaError || e instanceof SpecError) {
      console.error(`error: ${e.message}`);
      return 1;
    }
    throw e;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && fileURLToPath(import.meta.url) === resolve(process.argv[1]);
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
