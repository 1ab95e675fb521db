/** World-to-screen viewport transforms for the two panels. */

export interface Viewport {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
  width: number;
  height: number;
  padding: number;
}

export function makeViewport(
  xs: number[],
  ys: number[],
  width: number,
  height: number,
  padding = 24,
): Viewport {
  let xMin = Math.min(...xs);
  let xMax = Math.max(...xs);
  let yMin = Math.min(...ys);
  let yMax = Math.max(...ys);
  if (!isFinite(xMin) || xs.length === 0) {
    xMin = -0.2;
    xMax = 1.0;
    yMin = 0.0;
    yMax = 1.5;
  }
  const xr = Math.max(xMax - xMin, 1e-6);
  const yr = Math.max(yMax - yMin, 1e-6);
  return {
    xMin: xMin - 0.08 * xr,
    xMax: xMax + 0.08 * xr,
    yMin: yMin - 0.08 * yr,
    yMax: yMax + 0.08 * yr,
    width,
    height,
    padding,
  };
}

export function toScreen(vp: Viewport, x: number, y: number): [number, number] {
  const w = vp.width - 2 * vp.padding;
  const h = vp.height - 2 * vp.padding;
  const sx = vp.padding + ((x - vp.xMin) / (vp.xMax - vp.xMin)) * w;
  const sy = vp.height - vp.padding - ((y - vp.yMin) / (vp.yMax - vp.yMin)) * h;
  return [sx, sy];
}
