// Round audio capture and chunked upload.
//
// The media source is injectable: the browser build uses MediaRecorder over
// getUserMedia, tests use a scripted source. Chunks upload strictly in
// order with the expected byte offset, so a retried request that already
// landed is detected (OffsetMismatch with the advanced length) instead of
// being appended twice. An upload that stays broken marks a failed audio
// attempt through the facilitator endpoint.

import { ApiClient, ApiError } from "./api";

export interface MediaSource {
  mimeType: string;
  start(onChunk: (chunk: Uint8Array) => void): Promise<void>;
  stop(): void;
}

export function browserMicrophone(timesliceMs = 1000): MediaSource {
  let recorder: MediaRecorder | null = null;
  return {
    mimeType: "audio/webm",
    async start(onChunk) {
      const stream = await navigator.mediaDevices.getUserMedia({ audio: true });
      recorder = new MediaRecorder(stream, { mimeType: "audio/webm" });
      recorder.ondataavailable = async (event: BlobEvent) => {
        if (!event.data || event.data.size === 0) return;
        onChunk(new Uint8Array(await event.data.arrayBuffer()));
      };
      recorder.start(timesliceMs);
    },
    stop() {
      recorder?.stop();
      recorder?.stream.getTracks().forEach((track) => track.stop());
      recorder = null;
    },
  };
}

const MAX_RETRIES = 3;
const RETRY_DELAY_MS = 250;

export class RoundRecorder {
  private recordingId: string | null = null;
  private round: string | null = null;
  private participantId = "";
  private sessionId = "";
  private queue: Uint8Array[] = [];
  private uploaded = 0;
  private pumpPromise: Promise<void> | null = null;
  private failed = false;

  constructor(
    private api: ApiClient,
    private source: MediaSource,
  ) {}

  get active(): boolean {
    return this.recordingId !== null;
  }

  async startSlot(
    sessionId: string,
    round: string,
    slotIndex: number,
    participantId: string,
  ): Promise<void> {
    if (this.active) await this.stopSlot();
    const begin = await this.api.audioBegin(round, slotIndex, participantId, this.source.mimeType);
    this.recordingId = begin.recording_id;
    this.round = round;
    this.participantId = participantId;
    this.sessionId = sessionId;
    this.queue = [];
    this.uploaded = 0;
    this.failed = false;
    await this.source.start((chunk) => this.enqueue(chunk));
  }

  private enqueue(chunk: Uint8Array): void {
    if (!this.recordingId || this.failed) return;
    this.queue.push(chunk);
    void this.pump();
  }

  private pump(): Promise<void> {
    // Always hands back the in-flight drain, so waiters actually wait.
    if (!this.pumpPromise) {
      this.pumpPromise = this.drain().finally(() => {
        this.pumpPromise = null;
      });
    }
    return this.pumpPromise;
  }

  private async drain(): Promise<void> {
    if (!this.recordingId) return;
    while (this.queue.length > 0) {
      const chunk = this.queue[0];
      await this.uploadWithRetry(chunk);
      this.queue.shift();
      this.uploaded += chunk.length;
    }
  }

  private async uploadWithRetry(chunk: Uint8Array): Promise<void> {
    for (let attempt = 1; ; attempt++) {
      try {
        await this.api.audioChunk(this.recordingId!, chunk, this.uploaded);
        return;
      } catch (error) {
        if (error instanceof ApiError && error.code === "OffsetMismatch") {
          // The previous send landed after all; treat as applied.
          return;
        }
        if (attempt >= MAX_RETRIES) {
          this.failed = true;
          await this.markFailure();
          throw error;
        }
        await new Promise((resolve) => setTimeout(resolve, RETRY_DELAY_MS * attempt));
      }
    }
  }

  private async markFailure(): Promise<void> {
    const feature = this.round === "speaking" ? "audio_speaking" : "audio_qa";
    try {
      await this.api.markAttempt(this.sessionId, feature, this.participantId, "failure");
    } catch {
      // the mark is best effort; the recording failure already surfaced
    }
  }

  async stopSlot(): Promise<void> {
    if (!this.recordingId) return;
    this.source.stop();
    while (this.queue.length > 0 || this.pumpPromise) {
      await this.pump(); // flush everything buffered or in flight
    }
    const recordingId = this.recordingId;
    this.recordingId = null;
    if (this.failed || this.uploaded === 0) return;
    try {
      await this.api.audioFinalize(recordingId);
    } catch {
      await this.markFailure();
    }
  }
}
