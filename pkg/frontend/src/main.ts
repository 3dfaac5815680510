/** Studio wiring: one canvas, an instance palette, a hierarchy panel, run
 * buttons, and the score table. One in-flight run at a time. */

import { EngineClient, ApiError } from "./api.js";
import { renderResult, ResultOverlays } from "./overlays.js";
import {
  buildRunRequest,
  createScene,
  exportScenario,
  importScenario,
  InstanceType,
  placeInstance,
  reorderClass,
  SceneState,
  setCandidate,
} from "./scene.js";
import { defaultViewport, drawScene, toWorld } from "./render.js";
import { HierarchyDoc, ScenarioDoc } from "./schema.js";

const client = new EngineClient(
  (window as unknown as { RULEPILOT_URL?: string }).RULEPILOT_URL ?? "http://127.0.0.1:8321",
);

async function boot(): Promise<void> {
  const canvas = document.getElementById("map") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const status = document.getElementById("status")!;
  const scores = document.getElementById("scores")!;
  const banner = document.getElementById("banner")!;
  const hierarchyPanel = document.getElementById("hierarchy")!;

  const names = await client.listScenarios().catch(() => []);
  if (names.length === 0) {
    status.textContent = "service unreachable or no stored scenarios";
    return;
  }
  const scenario = (await client.getScenario(names[0]!)) as ScenarioDoc;
  const hierarchyResp = await fetch("./default-hierarchy.json");
  const hierarchy = (await hierarchyResp.json()) as HierarchyDoc;
  const scene = createScene(scenario, hierarchy);
  let overlays: ResultOverlays | null = null;
  let busy = false;
  let drawing: [number, number][] | null = null;
  let tool: InstanceType | "draw" = "parked";
  const vp = defaultViewport(canvas, scene);

  function redraw(): void {
    drawScene(ctx, vp, scene, overlays);
    renderHierarchy();
  }

  function renderHierarchy(): void {
    hierarchyPanel.innerHTML = "";
    scene.hierarchy.classes.forEach((cls, i) => {
      const row = document.createElement("div");
      row.className = "cls";
      row.textContent = `P${i + 1}: ${cls.join(", ")}`;
      const up = document.createElement("button");
      up.textContent = "↑";
      up.onclick = () => {
        reorderClass(scene, cls[0]!, i + 1);
        redraw();
      };
      const down = document.createElement("button");
      down.textContent = "↓";
      down.onclick = () => {
        reorderClass(scene, cls[0]!, i - 1);
        redraw();
      };
      row.append(" ", down, up);
      hierarchyPanel.append(row);
    });
  }

  function renderScores(): void {
    scores.innerHTML = "";
    if (!overlays) return;
    for (const row of overlays.scores) {
      const div = document.createElement("div");
      div.textContent = `${row.rule}: ${row.total.toFixed(4)}`;
      div.className = row.violated ? "violated" : "clean";
      scores.append(div);
    }
    if (overlays.banner) {
      banner.textContent = overlays.banner.text;
      banner.className = overlays.banner.kind;
    } else {
      banner.textContent = "";
      banner.className = "";
    }
  }

  for (const type of ["pedestrian", "parked", "active", "draw"] as const) {
    document.getElementById(`tool-${type}`)!.onclick = () => {
      tool = type;
      status.textContent = `tool: ${type}`;
    };
  }

  canvas.onmousedown = (ev) => {
    const [wx, wy] = toWorld(vp, canvas, ev.offsetX, ev.offsetY);
    if (tool === "draw") {
      drawing = [[wx, wy]];
    } else {
      placeInstance(scene, tool, wx, wy);
      redraw();
    }
  };
  canvas.onmousemove = (ev) => {
    if (!drawing) return;
    const [wx, wy] = toWorld(vp, canvas, ev.offsetX, ev.offsetY);
    drawing.push([wx, wy]);
  };
  canvas.onmouseup = () => {
    if (drawing && drawing.length > 3) {
      setCandidate(scene, drawing);
      status.textContent = `candidate: ${scene.candidate.length} points`;
    }
    drawing = null;
    redraw();
  };

  async function launch(mode: "offline" | "online" | "evaluate"): Promise<void> {
    if (busy) return;
    busy = true;
    status.textContent = `running ${mode}…`;
    try {
      const request = buildRunRequest(scene, mode, {
        coverage_beta: 20.0,
        coverage_z_max: 6,
      });
      const response = await client.run(request);
      overlays = renderResult(response);
      status.textContent = `${mode} done`;
    } catch (err) {
      status.textContent =
        err instanceof ApiError && err.pointer
          ? `error at ${err.pointer}: ${err.message}`
          : String(err);
    } finally {
      busy = false;
      redraw();
      renderScores();
    }
  }

  document.getElementById("run-offline")!.onclick = () => void launch("offline");
  document.getElementById("run-online")!.onclick = () => void launch("online");
  document.getElementById("run-evaluate")!.onclick = () => void launch("evaluate");
  document.getElementById("export")!.onclick = () => {
    const doc = exportScenario(scene);
    const blob = new Blob([JSON.stringify(doc, null, 2)], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = `${doc.name}.json`;
    a.click();
  };
  document.getElementById("import")!.onclick = async () => {
    const input = document.createElement("input");
    input.type = "file";
    input.onchange = async () => {
      const file = input.files?.[0];
      if (!file) return;
      try {
        importScenario(scene, JSON.parse(await file.text()));
        overlays = null;
        redraw();
        renderScores();
      } catch (err) {
        status.textContent = String(err);
      }
    };
    input.click();
  };

  redraw();
}

void boot();
