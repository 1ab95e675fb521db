/** Thin canvas executor for the declarative draw operations. */

import { DrawOp } from "./view.js";

export function paint(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (const op of ops) {
    switch (op.kind) {
      case "axes":
        ctx.strokeStyle = "#d1d5db";
        ctx.strokeRect(12, 12, ctx.canvas.width - 24, ctx.canvas.height - 24);
        ctx.fillStyle = "#6b7280";
        ctx.font = "11px sans-serif";
        ctx.fillText(op.label, 18, ctx.canvas.height - 18);
        break;
      case "cells":
        ctx.fillStyle = op.color;
        for (const [x, y] of op.points) {
          ctx.fillRect(x - op.size / 2, y - op.size / 2, op.size, op.size);
        }
        break;
      case "polyline": {
        if (op.points.length < 2) break;
        ctx.strokeStyle = op.color;
        ctx.lineWidth = op.width;
        ctx.beginPath();
        ctx.moveTo(op.points[0][0], op.points[0][1]);
        for (const [x, y] of op.points.slice(1)) ctx.lineTo(x, y);
        ctx.stroke();
        break;
      }
      case "rect":
        if (op.fill) {
          ctx.fillStyle = op.color;
          ctx.fillRect(op.x, op.y, op.w, op.h);
        } else {
          ctx.strokeStyle = op.color;
          ctx.lineWidth = 1.5;
          ctx.strokeRect(op.x, op.y, op.w, op.h);
        }
        break;
      case "dot":
        ctx.fillStyle = op.color;
        ctx.beginPath();
        ctx.arc(op.x, op.y, op.r, 0, 2 * Math.PI);
        ctx.fill();
        break;
      case "text":
        ctx.fillStyle = op.color;
        ctx.font = "12px sans-serif";
        ctx.fillText(op.text, op.x, op.y);
        break;
    }
  }
}
