/** Client for the keypoint refinement session API. */

export interface SessionResponse {
  session_id: string;
  k: number;
  image_size: [number, number];
  keypoints: number[][];
  step: number;
}

export interface ClickResponse {
  session_id: string;
  keypoints: number[][];
  step: number;
}

export interface UndoResponse extends ClickResponse {
  undone: boolean;
}

export interface SessionDetail extends SessionResponse {
  history_length: number;
  clicks: { keypoint: number; x: number; y: number }[];
}

export type FetchLike = typeof fetch;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function parse<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && body.detail) detail = JSON.stringify(body.detail);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class SessionClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  async createSession(imageBase64: string): Promise<SessionResponse> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_base64: imageBase64 }),
    });
    return parse<SessionResponse>(resp);
  }

  async applyClick(
    sessionId: string,
    keypoint: number,
    x: number,
    y: number,
  ): Promise<ClickResponse> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/clicks`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ keypoint, x, y }),
    });
    return parse<ClickResponse>(resp);
  }

  async undo(sessionId: string): Promise<UndoResponse> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/undo`, {
      method: "POST",
    });
    return parse<UndoResponse>(resp);
  }

  async getSession(sessionId: string): Promise<SessionDetail> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}`);
    return parse<SessionDetail>(resp);
  }

  async deleteSession(sessionId: string): Promise<void> {
    await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}`, { method: "DELETE" });
  }

  async health(): Promise<{ status: string; k: number }> {
    const resp = await this.fetchImpl(`${this.baseUrl}/healthz`);
    return parse(resp);
  }
}
