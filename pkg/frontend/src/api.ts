import type {
  DatabaseInfo,
  ExampleInfo,
  SessionResult,
  SessionSummary,
  SubmitPayload,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let message = `${response.status}`;
    try {
      const body = await response.json();
      message = body?.detail?.message ?? JSON.stringify(body);
    } catch {
      /* non-JSON error body; keep the status text */
    }
    throw new ApiError(response.status, message);
  }
  return (await response.json()) as T;
}

/** Thin typed client over the session API; `base` is "" in the browser. */
export class Client {
  constructor(private base = "") {}

  listExamples(): Promise<ExampleInfo[]> {
    return request(`${this.base}/examples`);
  }

  listDatabases(): Promise<DatabaseInfo[]> {
    return request(`${this.base}/databases`);
  }

  createSession(body: {
    question?: string;
    dialect?: string;
    database_id?: string;
    example_id?: string;
  }): Promise<SessionSummary> {
    return request(`${this.base}/sessions`, { method: "POST", body: JSON.stringify(body) });
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return request(`${this.base}/sessions/${sessionId}`);
  }

  submitAnswers(sessionId: string, payload: SubmitPayload): Promise<SessionSummary> {
    return request(`${this.base}/sessions/${sessionId}/answers`, {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }

  getResult(sessionId: string): Promise<SessionResult> {
    return request(`${this.base}/sessions/${sessionId}/result`);
  }
}
