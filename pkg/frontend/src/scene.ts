/**
 * Editable scene state. Everything here is pure data manipulation so it can
 * be unit-tested headless; the canvas layer only reads from it.
 */

import {
  HierarchyDoc,
  InstanceDoc,
  RunRequest,
  ScenarioDoc,
  runRequestSchema,
  scenarioSchema,
} from "./schema.js";

export const FOOTPRINTS = {
  pedestrian: { length_m: 0.6, width_m: 0.6, rear_to_cog_m: 0.3, front_to_cog_m: 0.3 },
  parked: { length_m: 4.0, width_m: 1.8, rear_to_cog_m: 2.0, front_to_cog_m: 2.0 },
  active: { length_m: 4.0, width_m: 1.8, rear_to_cog_m: 2.0, front_to_cog_m: 2.0 },
} as const;

export type InstanceType = keyof typeof FOOTPRINTS;

export interface SceneState {
  scenario: ScenarioDoc;
  hierarchy: HierarchyDoc;
  candidate: [number, number][];
  dirty: boolean;
}

export function createScene(scenario: ScenarioDoc, hierarchy: HierarchyDoc): SceneState {
  return { scenario: structuredClone(scenario), hierarchy: structuredClone(hierarchy), candidate: [], dirty: false };
}

let placedCounter = 0;

/** Drag-to-place an instance at a clicked map point. */
export function placeInstance(
  scene: SceneState,
  type: InstanceType,
  x: number,
  y: number,
  heading = 0,
): InstanceDoc {
  const existing = new Set(scene.scenario.instances.map((inst) => inst.id));
  let id = `${type}${placedCounter}`;
  while (existing.has(id)) {
    placedCounter += 1;
    id = `${type}${placedCounter}`;
  }
  const instance: InstanceDoc = {
    id,
    type,
    footprint: { ...FOOTPRINTS[type] },
    pose: { x_m: x, y_m: y, heading_rad: heading },
    motion:
      type === "active"
        ? { model: "constant_velocity", vx_mps: 5.0, vy_mps: 0.0 }
        : { model: "static" },
  };
  scene.scenario.instances.push(instance);
  scene.dirty = true;
  return instance;
}

export function removeInstance(scene: SceneState, id: string): boolean {
  const before = scene.scenario.instances.length;
  scene.scenario.instances = scene.scenario.instances.filter((inst) => inst.id !== id);
  scene.dirty ||= scene.scenario.instances.length !== before;
  return scene.scenario.instances.length !== before;
}

export function moveInstance(scene: SceneState, id: string, x: number, y: number): void {
  const inst = scene.scenario.instances.find((candidate) => candidate.id === id);
  if (!inst) throw new Error(`unknown instance ${id}`);
  inst.pose.x_m = x;
  inst.pose.y_m = y;
  scene.dirty = true;
}

/** Resample a freehand polyline at fixed arc-length spacing (meters). */
export function resamplePolyline(
  points: [number, number][],
  spacing = 0.5,
): [number, number][] {
  if (points.length < 2) return points.slice();
  const cumulative = [0];
  for (let i = 1; i < points.length; i++) {
    const [px, py] = points[i - 1]!;
    const [qx, qy] = points[i]!;
    cumulative.push(cumulative[i - 1]! + Math.hypot(qx - px, qy - py));
  }
  const total = cumulative[cumulative.length - 1]!;
  const out: [number, number][] = [];
  let seg = 1;
  for (let t = 0; t < total; t += spacing) {
    while (seg < points.length - 1 && cumulative[seg]! < t) seg += 1;
    const t0 = cumulative[seg - 1]!;
    const t1 = cumulative[seg]!;
    const w = t1 > t0 ? (t - t0) / (t1 - t0) : 0;
    const [px, py] = points[seg - 1]!;
    const [qx, qy] = points[seg]!;
    out.push([px + w * (qx - px), py + w * (qy - py)]);
  }
  out.push(points[points.length - 1]!.slice() as [number, number]);
  return out;
}

export function setCandidate(scene: SceneState, freehand: [number, number][]): void {
  scene.candidate = resamplePolyline(freehand, 0.5);
  scene.dirty = true;
}

/**
 * Move a rule's equivalence class to a new position in the priority order
 * (index 0 = lowest priority). Classes renumber implicitly by array order.
 */
export function reorderClass(scene: SceneState, ruleId: string, newIndex: number): void {
  const classes = scene.hierarchy.classes;
  const from = classes.findIndex((cls) => cls.includes(ruleId));
  if (from < 0) throw new Error(`rule ${ruleId} not found in any class`);
  const clamped = Math.max(0, Math.min(classes.length - 1, newIndex));
  const [cls] = classes.splice(from, 1);
  classes.splice(clamped, 0, cls!);
  scene.dirty = true;
}

export function setRuleParam(
  scene: SceneState,
  ruleId: string,
  key: string,
  value: number,
): void {
  const rule = scene.hierarchy.rules[ruleId];
  if (!rule) throw new Error(`unknown rule ${ruleId}`);
  if (value < 0) throw new Error(`${ruleId}.${key} must be >= 0`);
  rule.params[key] = value;
  scene.dirty = true;
}

/** Serialize the edited scenario; throws with field paths when invalid. */
export function exportScenario(scene: SceneState): ScenarioDoc {
  const parsed = scenarioSchema.safeParse(scene.scenario);
  if (!parsed.success) {
    const issue = parsed.error.issues[0]!;
    throw new Error(`${issue.path.join("/")}: ${issue.message}`);
  }
  return structuredClone(parsed.data);
}

export function importScenario(scene: SceneState, doc: unknown): void {
  const parsed = scenarioSchema.safeParse(doc);
  if (!parsed.success) {
    const issue = parsed.error.issues[0]!;
    throw new Error(`${issue.path.join("/")}: ${issue.message}`);
  }
  scene.scenario = structuredClone(parsed.data);
  scene.dirty = false;
}

/** A validated run request; schema-invalid edits never reach the server. */
export function buildRunRequest(
  scene: SceneState,
  mode: RunRequest["mode"],
  config?: Record<string, unknown>,
  targetSpeed?: number,
): RunRequest {
  const body: RunRequest = {
    mode,
    scenario: exportScenario(scene),
    hierarchy: structuredClone(scene.hierarchy),
    ...(config ? { config } : {}),
  };
  if (mode === "evaluate") {
    if (scene.candidate.length < 4) {
      throw new Error("candidate: draw a polyline with at least 4 points first");
    }
    body.candidate = {
      points_m: scene.candidate.map((p) => [p[0], p[1]] as [number, number]),
      ...(targetSpeed ? { target_speed_mps: targetSpeed } : {}),
    };
  }
  const parsed = runRequestSchema.safeParse(body);
  if (!parsed.success) {
    const issue = parsed.error.issues[0]!;
    throw new Error(`${issue.path.join("/")}: ${issue.message}`);
  }
  return parsed.data;
}
