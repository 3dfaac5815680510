/**
 * Pure result-to-overlay computation: violation-colored sub-polylines, the
 * score table, and the pass/fail banner. The canvas layer draws these without
 * further logic, so the mapping is testable without a DOM.
 */

import { RunResponse, Segment } from "./schema.js";

export const RULE_COLORS: Record<string, string> = {
  r1: "#1f77b4",
  r2: "#9467bd",
  r3: "#d62728",
  r4: "#8c564b",
  r5: "#ff7f0e",
  r6: "#7f7f7f",
  r7: "#2ca02c",
  r8: "#e377c2",
};

export const CLEAN_COLOR = "#2b2b2b";

export interface ColoredPiece {
  /** Sample index range [start, end] inclusive, matching the segment table. */
  start: number;
  end: number;
  points: [number, number][];
  rules: string[];
  color: string;
}

function segmentColor(rules: string[]): string {
  if (rules.length === 0) return CLEAN_COLOR;
  const first = rules[0]!;
  return RULE_COLORS[first] ?? "#000000";
}

/**
 * Cut a trajectory into per-segment sub-polylines. Adjacent pieces share
 * their boundary sample so the drawn line stays connected.
 */
export function coloredPieces(
  poses: { x_m: number; y_m: number }[],
  segments: Segment[],
): ColoredPiece[] {
  const pieces: ColoredPiece[] = [];
  for (const seg of segments) {
    const last = Math.min(seg.end + 1, poses.length - 1);
    const points: [number, number][] = [];
    for (let i = seg.start; i <= last; i++) {
      const p = poses[i];
      if (p) points.push([p.x_m, p.y_m]);
    }
    pieces.push({
      start: seg.start,
      end: seg.end,
      points,
      rules: seg.rules.slice(),
      color: segmentColor(seg.rules),
    });
  }
  return pieces;
}

export interface ScoreRow {
  rule: string;
  total: number;
  violated: boolean;
}

export function scoreTable(totals: Record<string, number>): ScoreRow[] {
  return Object.keys(totals)
    .sort()
    .map((rule) => ({
      rule,
      total: totals[rule] ?? 0,
      violated: (totals[rule] ?? 0) > 0,
    }));
}

export interface ResultOverlays {
  pieces: ColoredPiece[];
  scores: ScoreRow[];
  banner: { text: string; kind: "pass" | "fail" | "info" } | null;
  alternativePieces: ColoredPiece[] | null;
  staleFor: string | null;
}

/**
 * Full overlay bundle for one run response. ``expectedScenarioHash`` guards
 * against rendering a response that belongs to an older edit of the scene.
 */
export function renderResult(
  response: RunResponse,
  expectedScenarioHash?: string,
): ResultOverlays {
  const stale =
    expectedScenarioHash !== undefined && response.scenario_hash !== expectedScenarioHash;
  const pieces = coloredPieces(response.trajectory.poses, response.segments);
  let banner: ResultOverlays["banner"] = null;
  if (response.verdict === "Pass") banner = { text: "PASS", kind: "pass" };
  if (response.verdict === "Fail") banner = { text: "FAIL — better trajectory found", kind: "fail" };
  let alternativePieces: ColoredPiece[] | null = null;
  if (response.alternative) {
    alternativePieces = coloredPieces(
      response.alternative.trajectory.poses,
      response.alternative.segments,
    );
  }
  return {
    pieces,
    scores: scoreTable(response.totals),
    banner,
    alternativePieces,
    staleFor: stale ? response.scenario_hash : null,
  };
}
