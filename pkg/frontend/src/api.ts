/** Thin client over the engine service; the studio's only network surface. */

import { RunRequest, RunResponse, ScenarioDoc, runResponseSchema } from "./schema.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly pointer?: string,
  ) {
    super(message);
  }
}

export class EngineClient {
  constructor(readonly baseUrl: string = "http://127.0.0.1:8321") {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      throw new ApiError(
        String(body["error"] ?? response.statusText),
        response.status,
        body["pointer"] as string | undefined,
      );
    }
    return body;
  }

  async health(): Promise<boolean> {
    try {
      const body = (await this.request("/health")) as { status?: string };
      return body.status === "ok";
    } catch {
      return false;
    }
  }

  async run(request: RunRequest): Promise<RunResponse> {
    const body = await this.request("/run", {
      method: "POST",
      body: JSON.stringify(request),
    });
    return runResponseSchema.parse(body);
  }

  async listScenarios(): Promise<string[]> {
    const body = (await this.request("/scenarios")) as { scenarios: string[] };
    return body.scenarios;
  }

  async getScenario(id: string): Promise<ScenarioDoc> {
    return (await this.request(`/scenarios/${id}`)) as ScenarioDoc;
  }

  async storeScenario(doc: ScenarioDoc): Promise<void> {
    await this.request("/scenarios", { method: "POST", body: JSON.stringify(doc) });
  }
}
