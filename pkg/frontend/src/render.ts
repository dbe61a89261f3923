/**
 * Builds the tracking figure from aggregate CSVs: drift rate on top, mean
 * k-NN error in the middle, NMI-threshold exceedance probability at the
 * bottom, one curve per algorithm arm.
 */

import { mkdirSync, readFileSync, writeFileSync } from "fs";
import { dirname, join, resolve } from "path";

import { PALETTE, PanelOpts, Series, svgDocument } from "./chart.js";
import { readAggregateCsv, readDriftCsv, SchemaError } from "./schema.js";

export interface ArmSpec {
  label: string;
  aggregate_csv: string;
}

export interface PlotSpec {
  arms: ArmSpec[];
  drift_csv: string;
  output_dir: string;
  basename?: string;
  nmi_threshold?: number;
}

export class SpecError extends Error {}

export function loadSpec(path: string): PlotSpec {
  let payload: unknown;
  try {
    payload = JSON.parse(readFileSync(path, "utf-8"));
  } catch (e) {
    throw new SpecError(`cannot read spec ${path}: ${(e as Error).message}`);
  }
  const spec = payload as PlotSpec;
  if (!Array.isArray(spec.arms) || spec.arms.length === 0) {
    throw new SpecError(`${path}: "arms" must be a non-empty array`);
  }
  for (const arm of spec.arms) {
    if (typeof arm.label !== "string" || typeof arm.aggregate_csv !== "string") {
      throw new SpecError(`${path}: each arm needs "label" and "aggregate_csv"`);
    }
  }
  if (typeof spec.drift_csv !== "string") {
    throw new SpecError(`${path}: "drift_csv" is required`);
  }
  if (typeof spec.output_dir !== "string") {
    throw new SpecError(`${path}: "output_dir" is required`);
  }
  const base = dirname(resolve(path));
  return {
    arms: spec.arms.map((a) => ({ label: a.label, aggregate_csv: resolve(base, a.aggregate_csv) })),
    drift_csv: resolve(base, spec.drift_csv),
    output_dir: resolve(base, spec.output_dir),
    basename: spec.basename ?? "tracking",
    nmi_threshold: spec.nmi_threshold ?? 0.8,
  };
}

export interface RenderResult {
  combined: string;
  panels: string[];
}

export function render(spec: PlotSpec): RenderResult {
  const drift = readDriftCsv(spec.drift_csv);
  const armRows = spec.arms.map((a) => readAggregateCsv(a.aggregate_csv));

  const driftSeries: Series[] = [
    {
      label: "generating metric",
      xs: drift.map((r) => r.t),
      ys: drift.map((r) => r.drift_rate),
      color: "#555555",
    },
  ];
  const errSeries: Series[] = spec.arms.map((a, i) => ({
    label: a.label,
    xs: armRows[i].map((r) => r.t),
    ys: armRows[i].map((r) => r.mean_knn_error),
    color: PALETTE[i % PALETTE.length],
  }));
  const nmiSeries: Series[] = spec.arms.map((a, i) => ({
    label: a.label,
    xs: armRows[i].map((r) => r.t),
    ys: armRows[i].map((r) => r.p_nmi_exceeds),
    color: PALETTE[i % PALETTE.length],
  }));

  const panels: PanelOpts[] = [
    {
      title: "Rate of change of the generating metric",
      xLabel: "step t",
      yLabel: "rel. Frobenius change / step",
      series: driftSeries,
      logY: true,
    },
    {
      title: "Mean k-NN error rate",
      xLabel: "step t",
      yLabel: "mean k-NN error",
      series: errSeries,
      yMin: 0,
    },
    {
      title: `Probability that k-means NMI exceeds ${spec.nmi_threshold}`,
      xLabel: "step t",
      yLabel: `P(NMI > ${spec.nmi_threshold})`,
      series: nmiSeries,
      yMin: 0,
      yMax: 1,
    },
  ];

  mkdirSync(spec.output_dir, { recursive: true });
  const combinedPath = join(spec.output_dir, `${spec.basename}.svg`);
  writeFileSync(combinedPath, svgDocument(panels));
  const names = ["drift_rate", "knn_error", "nmi_probability"];
  const panelPaths = panels.map((panel, i) => {
    const p = join(spec.output_dir, `${spec.basename}_${names[i]}.svg`);
    writeFileSync(p, svgDocument([panel]));
    return p;
  });
  return { combined: combinedPath, panels: panelPaths };
}

export { SchemaError };
