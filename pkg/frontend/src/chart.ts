import type { BandStats } from "./series.js";

export interface GroupCurve {
  label: string;
  colorIndex: number;
  grid: number[];
  stats: BandStats;
}

const WIDTH = 860;
const HEIGHT = 520;
const MARGIN = { left: 68, right: 18, top: 22, bottom: 48 };

const PALETTE = ["#3366cc", "#dc3912", "#109618", "#ff9900", "#990099", "#0099c6"];

function niceTicks(lo: number, hi: number, target = 6): number[] {
  if (hi === lo) return [lo];
  const raw = (hi - lo) / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10) * mag;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push(v);
  }
  return ticks;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e6 || a < 1e-3) return v.toExponential(1);
  return String(parseFloat(v.toPrecision(6)));
}

/** Render one chart as standalone SVG text. Pure function of its inputs. */
export function renderChart(curves: GroupCurve[], xLabel: string, yLabel: string): string {
  const xLo = Math.min(...curves.map((c) => c.grid[0]));
  const xHi = Math.max(...curves.map((c) => c.grid[c.grid.length - 1]));
  let yLo = Infinity;
  let yHi = -Infinity;
  for (const c of curves) {
    for (let i = 0; i < c.grid.length; i++) {
      const m = c.stats.mean[i];
      if (m === null) continue;
      const s = c.stats.std[i] ?? 0;
      yLo = Math.min(yLo, m - s);
      yHi = Math.max(yHi, m + s);
    }
  }
  if (yLo === Infinity) {
    yLo = 0;
    yHi = 1;
  }
  if (yHi === yLo) {
    yHi += 0.5;
    yLo -= 0.5;
  }
  const pad = (yHi - yLo) * 0.05;
  yLo -= pad;
  yHi += pad;

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (x: number) =>
    MARGIN.left + (xHi === xLo ? plotW / 2 : ((x - xLo) / (xHi - xLo)) * plotW);
  const py = (y: number) => MARGIN.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);

  for (const t of niceTicks(xLo, xHi)) {
    const x = px(t).toFixed(2);
    parts.push(
      `<line x1="${x}" y1="${MARGIN.top}" x2="${x}" y2="${MARGIN.top + plotH}" stroke="#eee"/>`,
    );
    parts.push(
      `<text x="${x}" y="${MARGIN.top + plotH + 18}" text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of niceTicks(yLo, yHi)) {
    const y = py(t).toFixed(2);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${MARGIN.left + plotW}" y2="${y}" stroke="#eee"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${y}" text-anchor="end" dominant-baseline="middle">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="#333"/>`,
  );
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 10}" text-anchor="middle">${xLabel}</text>`,
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${yLabel}</text>`,
  );

  for (const curve of curves) {
    const color = PALETTE[curve.colorIndex % PALETTE.length];
    // shaded band over each maximal stretch with two or more seeds
    for (const [a, b] of runsWhere(curve.stats.count, (n) => n >= 2)) {
      const upper: string[] = [];
      const lower: string[] = [];
      for (let i = a; i <= b; i++) {
        const m = curve.stats.mean[i] as number;
        const s = curve.stats.std[i] as number;
        upper.push(`${px(curve.grid[i]).toFixed(2)},${py(m + s).toFixed(2)}`);
        lower.push(`${px(curve.grid[i]).toFixed(2)},${py(m - s).toFixed(2)}`);
      }
      lower.reverse();
      parts.push(
        `<path class="band" d="M${upper.join(" L")} L${lower.join(" L")} Z" ` +
          `fill="${color}" fill-opacity="0.18" stroke="none"/>`,
      );
    }
    // mean line wherever at least one seed covers the grid point
    for (const [a, b] of runsWhere(curve.stats.count, (n) => n >= 1)) {
      const pts: string[] = [];
      for (let i = a; i <= b; i++) {
        const m = curve.stats.mean[i] as number;
        pts.push(`${px(curve.grid[i]).toFixed(2)},${py(m).toFixed(2)}`);
      }
      parts.push(
        `<polyline class="mean" points="${pts.join(" ")}" fill="none" ` +
          `stroke="${color}" stroke-width="1.8"/>`,
      );
    }
  }

  curves.forEach((curve, row) => {
    const color = PALETTE[curve.colorIndex % PALETTE.length];
    const y = MARGIN.top + 14 + row * 18;
    const x = MARGIN.left + 12;
    parts.push(
      `<line x1="${x}" y1="${y}" x2="${x + 24}" y2="${y}" stroke="${color}" stroke-width="1.8"/>`,
    );
    parts.push(`<text x="${x + 30}" y="${y + 4}">${escapeXml(curve.label)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function runsWhere(counts: number[], keep: (n: number) => boolean): Array<[number, number]> {
  const runs: Array<[number, number]> = [];
  let start = -1;
  for (let i = 0; i <= counts.length; i++) {
    const inside = i < counts.length && keep(counts[i]);
    if (inside && start < 0) start = i;
    if (!inside && start >= 0) {
      runs.push([start, i - 1]);
      start = -1;
    }
  }
  return runs;
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
