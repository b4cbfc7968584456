// Glue between the event stream, the projection, and the DOM. The server is
// authoritative: every user action becomes an HTTP call, every render comes
// from a fresh state snapshot keyed to the last event seen.

import { ApiClient, ApiError } from "./api";
import { EventStream } from "./sse";
import { formatClock, project, remainingSeconds, ScreenState } from "./projection";
import { focusTypedInput, renderScreen, showNotice, UiHandlers } from "./ui";
import { MediaSource, RoundRecorder } from "./recorder";
import type { LocalePackView, SessionEvent, StateView } from "./types";

const VOICE_ATTEMPTS_BEFORE_FALLBACK = 2;
const TIMER_REFRESH_MS = 250;

export interface ControllerOptions {
  mediaSource?: MediaSource;
  displayLocale?: string;
}

export class AppController {
  state: StateView | null = null;
  pack: LocalePackView | null = null;
  connected = false;

  private stream: EventStream | null = null;
  private streamSessionId: string | null = null;
  private wallAtSnapshot = 0;
  private recorder: RoundRecorder | null = null;
  private voiceAttemptsSinceConfirm = 0;
  private timerHandle: ReturnType<typeof setInterval> | null = null;
  private lastScreen: ScreenState | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private options: ControllerOptions = {},
  ) {
    if (options.mediaSource) this.recorder = new RoundRecorder(api, options.mediaSource);
  }

  async start(): Promise<void> {
    await this.refresh();
    const locale = this.options.displayLocale ?? this.state!.config.locale;
    this.pack = await this.api.getLocale(locale);
    this.connected = true;
    this.openStream(this.state!.session_id);
    this.timerHandle = setInterval(() => this.refreshTimerText(), TIMER_REFRESH_MS);
    this.render();
  }

  stop(): void {
    this.stream?.stop();
    if (this.timerHandle) clearInterval(this.timerHandle);
  }

  private openStream(sessionId: string): void {
    this.stream?.stop();
    this.streamSessionId = sessionId;
    this.stream = new EventStream(this.api.baseUrl, sessionId, {
      // Events are processed strictly one at a time, in order.
      onEvent: (event) => {
        this.eventChain = this.eventChain
          .then(() => this.onEvent(event))
          .catch((error) => this.notice((error as Error).message));
      },
      onStatus: (connected) => {
        this.connected = connected;
        this.render();
      },
    });
    this.stream.start();
  }

  private eventChain: Promise<void> = Promise.resolve();

  private async refresh(): Promise<void> {
    this.state = await this.api.getState();
    this.wallAtSnapshot = Date.now();
  }

  private async onEvent(event: SessionEvent): Promise<void> {
    await this.refresh();
    const after = this.state!;
    if (event.name === "participant_registered") this.voiceAttemptsSinceConfirm = 0;
    await this.driveRecorder(event);
    if (after.session_id !== this.streamSessionId) {
      this.openStream(after.session_id); // a finished session rolled over
    }
    this.render();
  }

  /** Recording follows the event stream, not local state diffs: a slot-start
   * event opens the next recording, a slot-end boundary closes the last. */
  private async driveRecorder(event: SessionEvent): Promise<void> {
    if (!this.recorder || !this.streamSessionId) return;
    const slotStart = event.name === "speaking_started" || event.name === "qa_started";
    const roundOver =
      event.name === "qa_preparation_started" ||
      event.name === "session_closed" ||
      event.name === "session_finished";
    if (!slotStart && !roundOver) return;
    try {
      if (this.recorder.active) await this.recorder.stopSlot();
      if (slotStart) {
        const round = event.name === "speaking_started" ? "speaking" : "qa";
        const slotIndex = Number(event.payload.slot_index ?? 0);
        const participantId = String(event.payload.participant_id ?? "");
        if (participantId) {
          await this.recorder.startSlot(this.streamSessionId, round, slotIndex, participantId);
        }
      }
    } catch (error) {
      this.notice(`audio: ${(error as Error).message}`);
    }
  }

  // -- user actions ----------------------------------------------------------

  async handleUtterance(text: string): Promise<void> {
    const wasRegistration = this.state?.phase === "registration";
    try {
      const result = await this.api.postUtterance(text);
      this.state = result.state;
      this.wallAtSnapshot = Date.now();
      if (result.command === "no_match") {
        this.countVoiceFailure("not recognized, please try again");
      } else if (result.command === "free_text" && wasRegistration) {
        // A voice name proposal that is never confirmed is a failed attempt;
        // after two of them the typed fail-safe takes over.
        this.countVoiceFailure("");
      }
      this.render();
      if (this.voiceAttemptsSinceConfirm >= VOICE_ATTEMPTS_BEFORE_FALLBACK) {
        focusTypedInput(this.root);
      }
    } catch (error) {
      if (error instanceof ApiError) {
        this.countVoiceFailure(error.message);
        this.render();
        if (this.voiceAttemptsSinceConfirm >= VOICE_ATTEMPTS_BEFORE_FALLBACK) {
          focusTypedInput(this.root);
        }
      } else {
        throw error;
      }
    }
  }

  private countVoiceFailure(message: string): void {
    if (message) this.notice(message);
    if (this.state?.phase !== "registration" && this.state?.phase !== "topic_collection") return;
    this.voiceAttemptsSinceConfirm += 1;
    if (this.voiceAttemptsSinceConfirm >= VOICE_ATTEMPTS_BEFORE_FALLBACK) {
      this.notice(this.pack?.labels.typed_fallback_hint ?? "");
    }
  }

  async typedSubmit(value: string): Promise<void> {
    try {
      if (this.state?.phase === "registration") {
        await this.api.proposeParticipant(value, "typed");
      } else if (this.state?.phase === "topic_collection") {
        const speaker = this.state.current_participant_id;
        if (speaker) await this.api.submitTopic(speaker, value, "typed");
      }
      await this.refresh();
      this.render();
    } catch (error) {
      this.notice((error as Error).message);
    }
  }

  private action(call: () => Promise<unknown>): () => void {
    return () => {
      void call()
        .then(() => this.refresh())
        .then(() => this.render())
        .catch((error) => this.notice((error as Error).message));
    };
  }

  async setDisplayLocale(locale: string): Promise<void> {
    // Pure re-labeling: no reload, session position untouched.
    this.pack = await this.api.getLocale(locale);
    this.render();
  }

  // -- rendering ----------------------------------------------------------------

  private handlers(): UiHandlers {
    return {
      onRegister: this.action(() => this.api.openRegistration()),
      onStartSession: this.action(() => this.api.startSession()),
      onBack: this.action(() => this.api.back()),
      onConfirm: this.action(() => this.api.confirmParticipant()),
      onReady: this.action(() => this.api.ready()),
      onThemePick: (title) => this.action(() => this.api.selectTheme(title))(),
      onTypedSubmit: (value) => void this.typedSubmit(value),
      mediaUrl: (localPath) => this.api.mediaUrl(localPath),
    };
  }

  render(): void {
    if (!this.state || !this.pack) return;
    const screen = project(this.state, this.pack, this.connected);
    this.lastScreen = screen;
    const remaining = screen.timer
      ? remainingSeconds(screen.timer, Date.now(), this.wallAtSnapshot)
      : null;
    const hadFocus = typeof document !== "undefined" && document.activeElement?.id === "typed-input";
    renderScreen(this.root, screen, remaining, this.handlers());
    if (hadFocus) focusTypedInput(this.root); // re-renders never steal focus
  }

  private refreshTimerText(): void {
    const screen = this.lastScreen;
    if (!screen?.timer) return;
    const timer = this.root.querySelector("#timer");
    if (!timer) return;
    const remaining = remainingSeconds(screen.timer, Date.now(), this.wallAtSnapshot);
    timer.textContent = formatClock(remaining);
  }

  private notice(message: string): void {
    showNotice(this.root, message);
  }
}
