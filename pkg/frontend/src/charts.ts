// uPlot adapters: one line chart per metric family, with the 90% utilization
// guide line and switch-report annotations drawn on top of the plot.

import type { Annotation, SeriesBuffers } from "./model.js";

declare const uPlot: any;

const PALETTE = ["#2563eb", "#dc2626", "#16a34a", "#9333ea", "#ea580c", "#0891b2"];

export interface ChartHandle {
  update(): void;
  destroy(): void;
}

export function makeChart(
  el: HTMLElement,
  title: string,
  buffers: SeriesBuffers,
  metricIds: () => string[],
  annotations: () => Annotation[],
  opts: { thresholdPercent?: number; yMax?: number } = {},
): ChartHandle {
  let plot: any = null;
  let knownMetrics: string[] = [];

  const drawExtras = (u: any) => {
    const ctx: CanvasRenderingContext2D = u.ctx;
    ctx.save();
    if (opts.thresholdPercent !== undefined) {
      const y = u.valToPos(opts.thresholdPercent, "y", true);
      ctx.strokeStyle = "#b91c1c";
      ctx.setLineDash([6, 6]);
      ctx.beginPath();
      ctx.moveTo(u.bbox.left, y);
      ctx.lineTo(u.bbox.left + u.bbox.width, y);
      ctx.stroke();
      ctx.setLineDash([]);
    }
    for (const a of annotations()) {
      const x = u.valToPos(a.time, "x", true);
      if (x < u.bbox.left || x > u.bbox.left + u.bbox.width) continue;
      ctx.strokeStyle = "#92400e";
      ctx.beginPath();
      ctx.moveTo(x, u.bbox.top);
      ctx.lineTo(x, u.bbox.top + u.bbox.height);
      ctx.stroke();
      ctx.fillStyle = "#92400e";
      ctx.font = "10px sans-serif";
      ctx.fillText(a.label.slice(0, 40), x + 3, u.bbox.top + 12);
    }
    ctx.restore();
  };

  function rebuild() {
    knownMetrics = metricIds();
    const series = [{ label: "t (s)" }].concat(knownMetrics.map((id, i) => ({
      label: id,
      stroke: PALETTE[i % PALETTE.length],
      width: 1.5,
      spanGaps: false,
    } as any)));
    if (plot) plot.destroy();
    plot = new uPlot({
      title,
      width: el.clientWidth || 640,
      height: 240,
      series,
      scales: { x: { time: false }, y: { range: [0, opts.yMax ?? null] } },
      hooks: { draw: [drawExtras] },
      legend: { live: false },
    }, alignedData(buffers, knownMetrics), el);
  }

  function update() {
    const ids = metricIds();
    if (ids.join() !== knownMetrics.join() || plot === null) {
      rebuild();
      return;
    }
    plot.setData(alignedData(buffers, knownMetrics));
  }

  return {
    update,
    destroy: () => plot?.destroy(),
  };
}

function alignedData(buffers: SeriesBuffers, metricIds: string[]): any[] {
  // consolidate all metric slot axes onto one x axis
  const xs = new Set<number>();
  for (const id of metricIds) {
    for (const t of buffers.series(id).slots) xs.add(t);
  }
  const axis = [...xs].sort((a, b) => a - b);
  const index = new Map(axis.map((t, i) => [t, i]));
  const columns = metricIds.map((id) => {
    const col: (number | null)[] = new Array(axis.length).fill(null);
    const s = buffers.series(id);
    s.slots.forEach((t, i) => {
      col[index.get(t)!] = s.values[i];
    });
    return col;
  });
  return [axis, ...columns];
}
