// Canvas strip charts: raw telemetry as dots, Savitzky-Golay overlay as a
// line where one is requested. X is a sliding window of recent simulated
// time; Y ranges are fixed per chart so the operator's eye can calibrate.

import { ChartPoint } from "./client.js";
import { RingBuffer } from "./ringbuffer.js";
import { sgSmooth } from "./smoothing.js";

export interface Series {
  buffer: RingBuffer<ChartPoint>;
  color: string;
  smoothed?: boolean; // draw the SG overlay line instead of connecting raw
}

export interface ChartSpec {
  title: string;
  yMin: number;
  yMax: number;
  series: Series[];
}

const WINDOW_S = 30;
const MARGIN = { left: 34, right: 6, top: 16, bottom: 14 };

export class StripChart {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(private readonly canvas: HTMLCanvasElement, private readonly spec: ChartSpec) {
    const ctx = canvas.getContext("2d");
    if (ctx === null) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  draw(): void {
    const { ctx, canvas, spec } = this;
    const w = canvas.width;
    const h = canvas.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, w, h);

    const plotW = w - MARGIN.left - MARGIN.right;
    const plotH = h - MARGIN.top - MARGIN.bottom;
    let tMax = 0;
    for (const s of spec.series) {
      const last = s.buffer.last();
      if (last !== undefined && last.t > tMax) tMax = last.t;
    }
    const tMin = Math.max(0, tMax - WINDOW_S);
    const x = (t: number) => MARGIN.left + ((t - tMin) / Math.max(WINDOW_S, 1e-9)) * plotW;
    const y = (v: number) =>
      MARGIN.top + (1 - (v - spec.yMin) / (spec.yMax - spec.yMin)) * plotH;

    ctx.strokeStyle = "#2a3442";
    ctx.lineWidth = 1;
    ctx.strokeRect(MARGIN.left, MARGIN.top, plotW, plotH);
    ctx.fillStyle = "#8fa1b3";
    ctx.font = "10px sans-serif";
    ctx.fillText(spec.title, MARGIN.left, 11);
    ctx.fillText(spec.yMax.toString(), 2, MARGIN.top + 8);
    ctx.fillText(spec.yMin.toString(), 2, MARGIN.top + plotH);

    for (const s of spec.series) {
      const points = s.buffer.toArray();
      ctx.fillStyle = s.color;
      for (const p of points) {
        if (Number.isNaN(p.v) || p.t < tMin) continue;
        ctx.fillRect(x(p.t) - 1, y(clampTo(p.v, spec)) - 1, 2, 2);
      }
      if (s.smoothed && points.length >= 7) {
        const smoothed = sgSmooth(points.map((p) => p.v));
        ctx.strokeStyle = s.color;
        ctx.lineWidth = 1.5;
        ctx.beginPath();
        let penDown = false;
        for (let i = 0; i < points.length; i++) {
          const v = smoothed[i];
          if (Number.isNaN(v) || points[i].t < tMin) {
            penDown = false;
            continue;
          }
          const px = x(points[i].t);
          const py = y(clampTo(v, spec));
          if (penDown) ctx.lineTo(px, py);
          else ctx.moveTo(px, py);
          penDown = true;
        }
        ctx.stroke();
      }
    }
  }
}

function clampTo(v: number, spec: ChartSpec): number {
  return Math.min(spec.yMax, Math.max(spec.yMin, v));
}
