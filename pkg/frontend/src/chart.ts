/** Minimal hand-rolled SVG line charts (no DOM, no chart library). */

export interface Series {
  label: string;
  xs: number[];
  ys: number[];
  color: string;
  dash?: string;
}

export interface PanelOpts {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logY?: boolean;
  yMin?: number;
  yMax?: number;
}

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const W = 760;
const PANEL_H = 220;
const ML = 64;
const MR = 16;
const MT = 30;
const MB = 44;

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((n) => n >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 1e-9; v += step) ticks.push(v);
  return ticks;
}

function fmtTick(v: number): string {
  if (v !== 0 && (Math.abs(v) < 1e-3 || Math.abs(v) >= 1e4)) return v.toExponential(0);
  return Number(v.toPrecision(4)).toString();
}

/** Render one panel as an SVG <g> of fixed height at the given y offset. */
export function renderPanel(opts: PanelOpts, yOffset: number): string {
  const pw = W - ML - MR;
  const ph = PANEL_H - MT - MB;
  const allX = opts.series.flatMap((s) => s.xs);
  const xMin = Math.min(...allX);
  const xMax = Math.max(...allX);
  const xOf = (v: number) => ML + ((v - xMin) / (xMax - xMin || 1)) * pw;

  const floor = 1e-9;
  const tY = (v: number) => (opts.logY ? Math.log10(Math.max(v, floor)) : v);
  const allY = opts.series.flatMap((s) => s.ys).map(tY);
  let yMin = opts.yMin !== undefined ? tY(opts.yMin) : Math.min(...allY);
  let yMax = opts.yMax !== undefined ? tY(opts.yMax) : Math.max(...allY);
  if (yMax - yMin < 1e-12) {
    yMax = yMin + 1;
  }
  const pad = opts.logY ? 0.5 : (yMax - yMin) * 0.06;
  yMin -= opts.yMin !== undefined ? 0 : pad;
  yMax += pad;
  const yOf = (v: number) => yOffset + MT + ph - ((tY(v) - yMin) / (yMax - yMin)) * ph;

  let s = "";
  s += `<text x="${ML}" y="${yOffset + MT - 10}" font-size="12" font-weight="600" fill="#222">${esc(opts.title)}</text>\n`;

  const yTicks = opts.logY
    ? niceTicks(Math.floor(yMin), Math.ceil(yMax), 5).map((e) => Math.pow(10, e))
    : niceTicks(yMin, yMax, 5);
  for (const v of yTicks) {
    const y = yOf(v);
    if (y < yOffset + MT - 1 || y > yOffset + MT + ph + 1) continue;
    s += `<line x1="${ML}" y1="${y.toFixed(1)}" x2="${ML + pw}" y2="${y.toFixed(1)}" stroke="#eee" stroke-width="0.6"/>\n`;
    s += `<text x="${ML - 6}" y="${(y + 3.5).toFixed(1)}" text-anchor="end" font-size="9" fill="#555">${esc(fmtTick(v))}</text>\n`;
  }
  const xTicks = niceTicks(xMin, xMax, 8);
  for (const v of xTicks) {
    const x = xOf(v);
    s += `<line x1="${x.toFixed(1)}" y1="${yOffset + MT + ph}" x2="${x.toFixed(1)}" y2="${yOffset + MT + ph + 4}" stroke="#333" stroke-width="0.6"/>\n`;
    s += `<text x="${x.toFixed(1)}" y="${yOffset + MT + ph + 15}" text-anchor="middle" font-size="9" fill="#555">${esc(fmtTick(v))}</text>\n`;
  }

  for (const [i, ser] of opts.series.entries()) {
    const pts = ser.xs
      .map((x, j) => `${xOf(x).toFixed(1)},${Math.min(Math.max(yOf(ser.ys[j]), yOffset + MT), yOffset + MT + ph).toFixed(1)}`)
      .join(" ");
    s += `<polyline fill="none" stroke="${ser.color}" stroke-width="1.4" ${ser.dash ? `stroke-dasharray="${ser.dash}"` : ""} points="${pts}"/>\n`;
    const lx = ML + pw - 150;
    const ly = yOffset + MT + 12 + i * 13;
    s += `<line x1="${lx}" y1="${ly - 3}" x2="${lx + 16}" y2="${ly - 3}" stroke="${ser.color}" stroke-width="1.4" ${ser.dash ? `stroke-dasharray="${ser.dash}"` : ""}/>\n`;
    s += `<text x="${lx + 20}" y="${ly}" font-size="9" fill="#444">${esc(ser.label)}</text>\n`;
  }

  s += `<line x1="${ML}" y1="${yOffset + MT}" x2="${ML}" y2="${yOffset + MT + ph}" stroke="#333" stroke-width="0.8"/>\n`;
  s += `<line x1="${ML}" y1="${yOffset + MT + ph}" x2="${ML + pw}" y2="${yOffset + MT + ph}" stroke="#333" stroke-width="0.8"/>\n`;
  s += `<text x="${ML + pw / 2}" y="${yOffset + PANEL_H - 8}" text-anchor="middle" font-size="10" fill="#333">${esc(opts.xLabel)}</text>\n`;
  s += `<text x="16" y="${yOffset + MT + ph / 2}" text-anchor="middle" font-size="10" fill="#333" transform="rotate(-90,16,${yOffset + MT + ph / 2})">${esc(opts.yLabel)}</text>\n`;
  return s;
}

/** Wrap panels into a standalone SVG document. */
export function svgDocument(panels: PanelOpts[]): string {
  const height = panels.length * PANEL_H;
  let s = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${height}" font-family="Helvetica, Arial, sans-serif">\n`;
  s += `<rect width="${W}" height="${height}" fill="#fff"/>\n`;
  panels.forEach((p, i) => {
    s += renderPanel(p, i * PANEL_H);
  });
  s += "</svg>\n";
  return s;
}
