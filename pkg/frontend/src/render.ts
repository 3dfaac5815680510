/** Canvas drawing of the scene and result overlays (thin; logic lives in
 * scene.ts / overlays.ts). World frame: meters, +y up; screen: pixels. */

import { ResultOverlays } from "./overlays.js";
import { SceneState } from "./scene.js";

export interface Viewport {
  scale: number; // pixels per meter
  originX: number; // world x at canvas left
  originY: number; // world y at canvas vertical center
}

export function defaultViewport(canvas: HTMLCanvasElement, scene: SceneState): Viewport {
  const lane = scene.scenario.map.lanes[0]!;
  const xs = lane.centerline_m.map((p) => p[0]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const scale = canvas.width / Math.max(1, maxX - minX);
  return { scale, originX: minX, originY: 0 };
}

export function toScreen(vp: Viewport, canvas: HTMLCanvasElement, x: number, y: number): [number, number] {
  return [(x - vp.originX) * vp.scale, canvas.height / 2 - (y - vp.originY) * vp.scale];
}

export function toWorld(vp: Viewport, canvas: HTMLCanvasElement, px: number, py: number): [number, number] {
  return [px / vp.scale + vp.originX, (canvas.height / 2 - py) / vp.scale + vp.originY];
}

const INSTANCE_COLORS = { pedestrian: "#c46a00", parked: "#555588", active: "#117711" };

export function drawScene(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  scene: SceneState,
  overlays: ResultOverlays | null,
): void {
  const canvas = ctx.canvas;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  // drivable area
  const area = scene.scenario.map.drivable_area;
  ctx.fillStyle = "#f2f2ef";
  ctx.beginPath();
  const spine = area.spine_m;
  for (const [i, p] of spine.entries()) {
    const [sx, sy] = toScreen(vp, canvas, p[0], p[1] + area.left_extent_m);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  }
  for (let i = spine.length - 1; i >= 0; i--) {
    const p = spine[i]!;
    const [sx, sy] = toScreen(vp, canvas, p[0], p[1] - area.right_extent_m);
    ctx.lineTo(sx, sy);
  }
  ctx.closePath();
  ctx.fill();

  // lanes
  for (const lane of scene.scenario.map.lanes) {
    for (const side of [-0.5, 0, 0.5]) {
      ctx.beginPath();
      ctx.strokeStyle = side === 0 ? "#d8d8d8" : "#a0a0a0";
      ctx.setLineDash(side === 0 ? [6, 8] : []);
      for (const [i, p] of lane.centerline_m.entries()) {
        const [sx, sy] = toScreen(vp, canvas, p[0], p[1] + side * lane.width_m);
        if (i === 0) ctx.moveTo(sx, sy);
        else ctx.lineTo(sx, sy);
      }
      ctx.stroke();
      ctx.setLineDash([]);
    }
  }

  // instances
  for (const inst of scene.scenario.instances) {
    drawBox(ctx, vp, inst.pose.x_m, inst.pose.y_m, inst.pose.heading_rad,
      inst.footprint.length_m, inst.footprint.width_m,
      INSTANCE_COLORS[inst.type]);
  }

  // candidate polyline
  if (scene.candidate.length > 1) {
    ctx.beginPath();
    ctx.strokeStyle = "#888800";
    ctx.lineWidth = 2;
    for (const [i, p] of scene.candidate.entries()) {
      const [sx, sy] = toScreen(vp, canvas, p[0], p[1]);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    }
    ctx.stroke();
    ctx.lineWidth = 1;
  }

  // result overlays: violation-colored trajectory pieces
  if (overlays) {
    for (const piece of overlays.pieces) {
      strokePolyline(ctx, vp, piece.points, piece.color, 3);
    }
    if (overlays.alternativePieces) {
      for (const piece of overlays.alternativePieces) {
        strokePolyline(ctx, vp, piece.points, piece.color, 2, [4, 4]);
      }
    }
  }
}

function strokePolyline(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  points: [number, number][],
  color: string,
  width: number,
  dash: number[] = [],
): void {
  if (points.length < 2) return;
  ctx.beginPath();
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.setLineDash(dash);
  for (const [i, p] of points.entries()) {
    const [sx, sy] = toScreen(vp, ctx.canvas, p[0], p[1]);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  }
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.lineWidth = 1;
}

function drawBox(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  x: number,
  y: number,
  heading: number,
  length: number,
  width: number,
  color: string,
): void {
  const c = Math.cos(heading);
  const s = Math.sin(heading);
  const local: [number, number][] = [
    [length / 2, width / 2],
    [-length / 2, width / 2],
    [-length / 2, -width / 2],
    [length / 2, -width / 2],
  ];
  const corners: [number, number][] = local.map(
    ([lx, ly]) => [x + c * lx - s * ly, y + s * lx + c * ly],
  );
  ctx.beginPath();
  ctx.fillStyle = color;
  for (const [i, p] of corners.entries()) {
    const [sx, sy] = toScreen(vp, ctx.canvas, p[0], p[1]);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  }
  ctx.closePath();
  ctx.fill();
}
