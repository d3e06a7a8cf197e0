// Savitzky-Golay smoothing for chart overlays: quadratic fit over a sliding
// 7-point window, which reduces to one fixed convolution kernel on interior
// points. Edges (first/last 3 samples) and any window touching a gap (NaN)
// stay NaN so charts draw a gap instead of inventing data. Presentation
// only; nothing downstream consumes smoothed values.

export const SG_WINDOW = 7;
const HALF = 3;
export const SG_KERNEL = [-2, 3, 6, 7, 6, 3, -2].map((c) => c / 21);

export function sgSmooth(values: ArrayLike<number>): Float64Array {
  const n = values.length;
  const out = new Float64Array(n).fill(NaN);
  for (let i = HALF; i < n - HALF; i++) {
    let acc = 0;
    for (let k = -HALF; k <= HALF; k++) {
      acc += SG_KERNEL[k + HALF] * (values[i + k] as number);
    }
    out[i] = acc; // NaN inputs propagate, which is what we want
  }
  return out;
}
