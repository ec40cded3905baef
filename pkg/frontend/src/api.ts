// Thin typed client over the server endpoints.  Errors come back as values
// (status + payload) so the renderer can treat every documented code as a
// normal outcome rather than an exception.

import type {
  ApiErrorPayload,
  QueryResponse,
  SchemaPayload,
  SessionResponse,
} from "./types.js";

export interface ApiResult<T> {
  ok: boolean;
  status: number;
  body?: T;
  error?: ApiErrorPayload["error"];
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<ApiResult<T>> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers: { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (exc) {
      return {
        ok: false,
        status: 0,
        error: { code: "NETWORK", message: String(exc) },
      };
    }
    const text = await response.text();
    let parsed: unknown = undefined;
    try {
      parsed = text ? JSON.parse(text) : undefined;
    } catch {
      parsed = undefined;
    }
    if (response.ok) {
      return { ok: true, status: response.status, body: parsed as T };
    }
    const payload = parsed as ApiErrorPayload | undefined;
    return {
      ok: false,
      status: response.status,
      error: payload?.error ?? {
        code: "UNKNOWN",
        message: text || response.statusText,
      },
    };
  }

  createSession(): Promise<ApiResult<SessionResponse>> {
    return this.request("POST", "/session", {});
  }

  query(sessionId: string, question: string): Promise<ApiResult<QueryResponse>> {
    return this.request("POST", "/query", {
      session_id: sessionId,
      question,
    });
  }

  schema(): Promise<ApiResult<SchemaPayload>> {
    return this.request("GET", "/schema");
  }

  health(): Promise<ApiResult<{ status: string }>> {
    return this.request("GET", "/health");
  }
}
