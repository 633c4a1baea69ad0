/** Typed client for the m3 gateway HTTP API (the only backend surface the
 * console touches). */

export interface ContentItem {
  type: "text" | "image";
  value: string;
}

export interface WireTurn {
  role: "system" | "user" | "assistant" | "expert-feedback";
  content: ContentItem[];
}

export interface TriggerEventWire {
  keyword: string;
  argument: string;
  span: [number, number];
}

export interface ExpertResultWire {
  task: "segmentation" | "classification";
  latency_ms: number;
  backend_id: string;
  classes_found?: [string, number][];
  mask_ref?: string;
  overlay_ref?: string;
  selected_slice?: number | null;
  probabilities?: [string, number][];
  per_model?: number[][];
}

export interface TriggerLogEntryWire {
  event: TriggerEventWire;
  status: "ok" | "error";
  result?: ExpertResultWire;
  error_code?: string;
  error_message?: string;
}

export interface TurnResponse {
  assistant_text: string;
  turns_delta: WireTurn[];
  triggers: TriggerLogEntryWire[];
  overlays: string[];
  expert_rounds_used: number;
}

export interface SessionResponse {
  session_id: string;
  registry_version: number;
  created: number;
  updated: number;
  expert_rounds_used: number;
  turns: WireTurn[];
  trigger_log: TriggerLogEntryWire[];
  images: Record<string, string>;
}

export interface ModelCardWire {
  name: string;
  trigger_keyword: string;
  description: string;
  valid_args: string[];
  modality: string;
  task: string;
  endpoint_ref: string;
}

export interface ModelsResponse {
  system_prompt: string;
  registry: { models: ModelCardWire[] };
  version: number;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  detail: string;
}

export class GatewayApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: string;

  constructor(status: number, envelope: ErrorEnvelope) {
    super(envelope.message);
    this.status = status;
    this.code = envelope.code;
    this.detail = envelope.detail;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(response: Response): Promise<Response> {
  if (response.ok) {
    return response;
  }
  let envelope: ErrorEnvelope = {
    code: `http_${response.status}`,
    message: response.statusText || `HTTP ${response.status}`,
    detail: "",
  };
  try {
    const body = await response.json();
    if (body && typeof body.code === "string") {
      envelope = { code: body.code, message: body.message ?? "", detail: body.detail ?? "" };
    }
  } catch {
    // non-JSON error body; keep the synthetic envelope
  }
  throw new GatewayApiError(response.status, envelope);
}

export class GatewayClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  async createSession(): Promise<{ session_id: string; registry_version: number }> {
    const response = await this.fetchImpl(`${this.base}/v1/sessions`, { method: "POST" });
    return (await raiseForStatus(response)).json();
  }

  async getSession(sessionId: string): Promise<SessionResponse> {
    const response = await this.fetchImpl(`${this.base}/v1/sessions/${sessionId}`);
    return (await raiseForStatus(response)).json();
  }

  async uploadImage(
    sessionId: string,
    data: Blob | ArrayBuffer,
    format: "png" | "jpeg" | "nii" | "raw-fixture",
  ): Promise<{ image_uri: string; name: string }> {
    const response = await this.fetchImpl(
      `${this.base}/v1/sessions/${sessionId}/images?format=${encodeURIComponent(format)}`,
      { method: "POST", body: data as BodyInit },
    );
    return (await raiseForStatus(response)).json();
  }

  imageUrl(sessionId: string, name: string): string {
    return `${this.base}/v1/sessions/${sessionId}/images/${name}`;
  }

  async sendTurn(sessionId: string, text: string, images: string[] = []): Promise<TurnResponse> {
    const response = await this.fetchImpl(`${this.base}/v1/sessions/${sessionId}/turns`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text, images }),
    });
    return (await raiseForStatus(response)).json();
  }

  async getModels(): Promise<ModelsResponse> {
    const response = await this.fetchImpl(`${this.base}/v1/models`);
    return (await raiseForStatus(response)).json();
  }
}
