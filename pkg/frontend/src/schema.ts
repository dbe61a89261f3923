/**
 * CSV readers for the experiment runner's output schemas.
 *
 * Aggregate per-arm CSV:  t,mean_knn_error,p_nmi_exceeds,mean_combined_loss
 * Drift profile CSV:      t,drift_rate
 *
 * Schema violations throw SchemaError naming the offending column.
 */

import { readFileSync } from "fs";

export const AGGREGATE_COLUMNS = [
  "t",
  "mean_knn_error",
  "p_nmi_exceeds",
  "mean_combined_loss",
] as const;

export const DRIFT_COLUMNS = ["t", "drift_rate"] as const;

export class SchemaError extends Error {}

export interface AggregateRow {
  t: number;
  mean_knn_error: number;
  p_nmi_exceeds: number;
  mean_combined_loss: number;
}

export interface DriftRow {
  t: number;
  drift_rate: number;
}

function splitCsv(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.length > 0)
    .map((line) => line.split(","));
}

function checkHeader(
  header: string[],
  expected: readonly string[],
  path: string
): void {
  for (const col of expected) {
    if (!header.includes(col)) {
      throw new SchemaError(`${path}: missing column "${col}"`);
    }
  }
  for (const col of header) {
    if (!expected.includes(col)) {
      throw new SchemaError(`${path}: unexpected column "${col}"`);
    }
  }
}

function parseNumeric(
  rows: string[][],
  header: string[],
  expected: readonly string[],
  path: string
): Record<string, number>[] {
  const idx = new Map(header.map((h, i) => [h, i]));
  return rows.map((row, r) => {
    if (row.length !== header.length) {
      throw new SchemaError(
        `${path}: row ${r + 2} has ${row.length} fields, expected ${header.length}`
      );
    }
    const out: Record<string, number> = {};
    for (const col of expected) {
      const v = Number(row[idx.get(col)!]);
      if (!Number.isFinite(v)) {
        throw new SchemaError(
          `${path}: row ${r + 2}, column "${col}" is not numeric: ${row[idx.get(col)!]}`
        );
      }
      out[col] = v;
    }
    return out;
  });
}

function readFileOrThrow(path: string): string {
  try {
    return readFileSync(path, "utf-8");
  } catch (e) {
    throw new SchemaError(`cannot read CSV ${path}: ${(e as Error).message}`);
  }
}

export function readAggregateCsv(path: string): AggregateRow[] {
  const lines = splitCsv(readFileOrThrow(path));
  if (lines.length === 0) {
    throw new SchemaError(`${path}: empty file`);
  }
  checkHeader(lines[0], AGGREGATE_COLUMNS, path);
  return parseNumeric(lines.slice(1), lines[0], AGGREGATE_COLUMNS, path) as unknown as AggregateRow[];
}

export function readDriftCsv(path: string): DriftRow[] {
  const lines = splitCsv(readFileOrThrow(path));
  if (lines.length === 0) {
    throw new SchemaError(`${path}: empty file`);
  }
  checkHeader(lines[0], DRIFT_COLUMNS, path);
  return parseNumeric(lines.slice(1), lines[0], DRIFT_COLUMNS, path) as unknown as DriftRow[];
}
