// Thin fetch wrapper over the service API. The UI never mutates state except
// through these endpoints; the server is the single source of truth.

import type { LocalePackView, StateView, UtteranceResult } from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
    readonly cause_code?: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body instanceof Uint8Array) {
      init.body = body as unknown as BodyInit;
      init.headers = { "content-type": "application/octet-stream" };
    } else if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "content-type": "application/json" };
    }
    const response = await fetch(`${this.baseUrl}${path}`, init);
    const data = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        data.error ?? `HTTP${response.status}`,
        data.detail ?? "",
        data.cause,
      );
    }
    return data as T;
  }

  getState(): Promise<StateView> {
    return this.request("GET", "/state");
  }

  getLocale(locale: string): Promise<LocalePackView> {
    return this.request("GET", `/locales/${locale}`);
  }

  postUtterance(text: string): Promise<UtteranceResult> {
    return this.request("POST", "/utterance", { text });
  }

  openRegistration() {
    return this.request<{ state: StateView }>("POST", "/registration/open");
  }

  proposeParticipant(name: string, via: string) {
    return this.request<{ state: StateView }>("POST", "/participants", { name, via });
  }

  confirmParticipant(token?: string) {
    return this.request<{ state: StateView }>("POST", "/participants/confirm", token ? { token } : {});
  }

  back() {
    return this.request<{ state: StateView }>("POST", "/session/back");
  }

  startSession() {
    return this.request<{ state: StateView }>("POST", "/session/start");
  }

  selectTheme(title: string) {
    return this.request<{ state: StateView }>("POST", "/session/select", { theme: title });
  }

  submitTopic(participantId: string, keyword: string, source: string) {
    return this.request<{ state: StateView }>("POST", "/session/topic", {
      participant_id: participantId,
      keyword,
      source,
    });
  }

  ready() {
    return this.request<{ state: StateView }>("POST", "/session/ready");
  }

  finishSession() {
    return this.request<{ state: StateView }>("POST", "/session/finish");
  }

  audioBegin(round: string, slotIndex: number, participantId: string, mediaType: string) {
    return this.request<{ recording_id: string }>("POST", "/audio/begin", {
      round,
      slot_index: slotIndex,
      participant_id: participantId,
      media_type: mediaType,
    });
  }

  audioChunk(recordingId: string, chunk: Uint8Array, expectedOffset: number) {
    return this.request<{ byte_len: number }>(
      "PUT",
      `/audio/${recordingId}/chunk?expected_offset=${expectedOffset}`,
      chunk,
    );
  }

  audioFinalize(recordingId: string) {
    return this.request<{ byte_len: number }>("POST", `/audio/${recordingId}/finalize`, {});
  }

  listRecordings(sessionId: string) {
    return this.request<Array<{ path: string; byte_len: number; round: string }>>(
      "GET",
      `/sessions/${sessionId}/recordings`,
    );
  }

  markAttempt(sessionId: string, feature: string, participantId: string, outcome: string) {
    return this.request("POST", `/sessions/${sessionId}/attempts`, {
      feature,
      participant_id: participantId,
      outcome,
    });
  }

  report(sessionId: string) {
    return this.request<{ rows: Array<Record<string, unknown>> }>(
      "GET",
      `/sessions/${sessionId}/report`,
    );
  }

  advanceClock(seconds: number) {
    return this.request<{ state: StateView }>("POST", "/clock/advance", { seconds });
  }

  mediaUrl(localPath: string): string {
    const name = localPath.split("/").pop() ?? "";
    return `${this.baseUrl}/media/${name}`;
  }
}
