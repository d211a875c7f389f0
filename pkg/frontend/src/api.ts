import type { Choice, Rollout, SessionState } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function parse<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
  }
  return body as T;
}

/** Thin typed client for the preference service. */
export class ServiceClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  createSession(): Promise<SessionState> {
    return this.fetchFn(`${this.baseUrl}/sessions`, { method: "POST" }).then((r) =>
      parse<SessionState>(r),
    );
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.fetchFn(`${this.baseUrl}/sessions/${sessionId}`).then((r) =>
      parse<SessionState>(r),
    );
  }

  submitPreference(sessionId: string, winner: Choice, queryId: number): Promise<SessionState> {
    return this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/preference`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ winner, query_id: queryId }),
    }).then((r) => parse<SessionState>(r));
  }

  getRollout(rolloutId: string): Promise<Rollout> {
    return this.fetchFn(`${this.baseUrl}/rollouts/${rolloutId}`).then((r) =>
      parse<Rollout>(r),
    );
  }
}
