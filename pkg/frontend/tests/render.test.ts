import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join, resolve } from "path";
import { describe, expect, it } from "vitest";

import { main } from "../src/cli.js";
import { loadSpec, render, SpecError } from "../src/render.js";

const FIXTURES = resolve(__dirname, "fixtures");

function specFile(dir: string, overrides: Record<string, unknown> = {}): string {
  const spec = {
    arms: [
      { label: "RICE-OCELAD", aggregate_csv: join(FIXTURES, "rice_ocelad.csv") },
      { label: "COMID (low rate)", aggregate_csv: join(FIXTURES, "comid_low.csv") },
    ],
    drift_csv: join(FIXTURES, "drift_profile.csv"),
    output_dir: join(dir, "figs"),
    nmi_threshold: 0.8,
    ...overrides,
  };
  const path = join(dir, "spec.json");
  writeFileSync(path, JSON.stringify(spec));
  return path;
}

describe("render", () => {
  it("produces the three-panel figure plus standalone panels", () => {
    const dir = mkdtempSync(join(tmpdir(), "mdplots-"));
    const result = render(loadSpec(specFile(dir)));
    const combined = readFileSync(result.combined, "utf-8");
    expect(combined.length).toBeGreaterThan(1000);
    expect(combined).toContain("Mean k-NN error rate");
    expect(combined).toContain("Rate of change of the generating metric");
    expect(combined).toContain("P(NMI &gt; 0.8)");
    expect(combined).toContain("step t");
    // one curve per arm in the error and NMI panels, one drift curve
    const polylines = combined.match(/<polyline/g) ?? [];
    expect(polylines.length).toBe(1 + 2 + 2);
    expect(combined).toContain("RICE-OCELAD");
    expect(combined).toContain("COMID (low rate)");
    expect(result.panels).toHaveLength(3);
    for (const p of result.panels) {
      expect(readFileSync(p, "utf-8")).toContain("<svg");
    }
  });

  it("renders one curve per arm when given three arms", () => {
    const dir = mkdtempSync(join(tmpdir(), "mdplots-"));
    const path = specFile(dir, {
      arms: [
        { label: "adaptive", aggregate_csv: join(FIXTURES, "rice_ocelad.csv") },
        { label: "low", aggregate_csv: join(FIXTURES, "comid_low.csv") },
        { label: "high", aggregate_csv: join(FIXTURES, "comid_high.csv") },
      ],
    });
    const result = render(loadSpec(path));
    const combined = readFileSync(result.combined, "utf-8");
    expect((combined.match(/<polyline/g) ?? []).length).toBe(1 + 3 + 3);
  });

  it("is idempotent over reruns", () => {
    const dir = mkdtempSync(join(tmpdir(), "mdplots-"));
    const spec = loadSpec(specFile(dir));
    const first = readFileSync(render(spec).combined, "utf-8");
    const second = readFileSync(render(spec).combined, "utf-8");
    expect(second).toBe(first);
  });

  it("fails with a named column on schema violations", () => {
    const dir = mkdtempSync(join(tmpdir(), "mdplots-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "t,mean_knn_error,mean_combined_loss\n1,0.1,0.2\n");
    const path = specFile(dir, {
      arms: [{ label: "broken", aggregate_csv: bad }],
    });
    expect(() => render(loadSpec(path))).toThrowError(/missing column "p_nmi_exceeds"/);
  });

  it("fails on a non-numeric cell with row and column named", () => {
    const dir = mkdtempSync(join(tmpdir(), "mdplots-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(
      bad,
      "t,mean_knn_error,p_nmi_exceeds,mean_combined_loss\n1,oops,0.0,0.2\n"
    );
    const path = specFile(dir, { arms: [{ label: "broken", aggregate_csv: bad }] });
    expect(() => render(loadSpec(path))).toThrowError(/column "mean_knn_error"/);
  });

  it("rejects malformed specs", () => {
    const dir = mkdtempSync(join(tmpdir(), "mdplots-"));
    const path = join(dir, "spec.json");
    writeFileSync(path, JSON.stringify({ arms: [] }));
    expect(() => loadSpec(path)).toThrowError(SpecError);
  });

  it("reports missing CSV files by path", () => {
    const dir = mkdtempSync(join(tmpdir(), "mdplots-"));
    const path = specFile(dir, {
      arms: [{ label: "x", aggregate_csv: join(dir, "nowhere.csv") }],
    });
    expect(() => render(loadSpec(path))).toThrowError(/cannot read CSV .*nowhere\.csv/);
  });
});

describe("cli", () => {
  it("renders via the render subcommand", () => {
    const dir = mkdtempSync(join(tmpdir(), "mdplots-"));
    const path = specFile(dir);
    expect(main(["render", "--spec", path])).toBe(0);
    expect(readFileSync(join(dir, "figs", "tracking.svg"), "utf-8")).toContain("<svg");
  });

  it("exits nonzero on schema violations", () => {
    const dir = mkdtempSync(join(tmpdir(), "mdplots-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "t,wrong\n1,2\n");
    const path = specFile(dir, { arms: [{ label: "x", aggregate_csv: bad }] });
    expect(main(["render", "--spec", path])).toBe(1);
  });

  it("exits nonzero without --spec", () => {
    expect(main(["render"])).toBe(2);
    expect(main(["paint"])).toBe(2);
  });
});
