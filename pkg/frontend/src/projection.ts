// Pure projection: server state snapshot -> what the screen must show.
// Everything here is a function of the last event's state; replaying the
// stream after a reconnect reconstructs the identical screen.

import type { LocalePackView, StateView, TopicView } from "./types";

export interface TimerInfo {
  endsAt: number; // server clock domain
  serverNow: number; // server clock at snapshot time
}

export interface ScreenState {
  screen: StateView["phase"];
  title: string;
  labels: Record<string, string>;
  rosterNames: string[];
  highlightId: string | null;
  speakerName: string | null;
  themeTitle: string | null;
  themeTitles: string[]; // active theme titles for the selection screen
  topicKeyword: string | null;
  imagePath: string | null; // local_path of the image to display
  timer: TimerInfo | null;
  confirmPendingName: string | null;
  heldTopic: { participantId: string; keyword: string; reason: string } | null;
  showReady: boolean;
  showTypedInput: boolean;
  closingMessage: string | null;
  reconnectBanner: boolean;
}

const SCREEN_TITLE_KEYS: Record<StateView["phase"], string> = {
  home: "home_title",
  registration: "registration_prompt",
  session_selection: "session_select_prompt",
  topic_collection: "topic_prompt",
  preparation: "preparation_title",
  speaking: "speaking_title",
  qa_preparation: "qa_preparation_title",
  qa: "qa_title",
  closing: "closing_message",
};

function participantName(state: StateView, id: string | null): string | null {
  if (!id) return null;
  const participant = state.roster.find((p) => p.id === id);
  return participant ? participant.display_name : id;
}

function currentRoundTopic(state: StateView): TopicView | null {
  const speaker = state.current_participant_id;
  if (!speaker) return null;
  return state.topics[speaker] ?? null;
}

function latestCollectedTopic(state: StateView): TopicView | null {
  // During collection the screen shows the image found for the most recent
  // answer (the participant just before the current turn).
  for (let i = state.slot_index; i >= 0; i--) {
    const pid = state.session_roster[i];
    if (pid && state.topics[pid]) return state.topics[pid];
  }
  return null;
}

export function project(
  state: StateView,
  pack: LocalePackView,
  connected: boolean,
): ScreenState {
  const labels = pack.labels;
  const phase = state.phase;
  const inRound = phase === "speaking" || phase === "qa";
  const locale = pack.locale;

  let imagePath: string | null = null;
  let topicKeyword: string | null = null;
  if (inRound) {
    const topic = currentRoundTopic(state);
    imagePath = topic?.image?.local_path ?? null;
    topicKeyword = topic?.keyword ?? null;
  } else if (phase === "topic_collection") {
    const topic = latestCollectedTopic(state);
    imagePath = topic?.image?.local_path ?? null;
    topicKeyword = topic?.keyword ?? null;
  }

  // Timed phases show a countdown; untimed ones never do. A disconnected
  // client hides the timer rather than displaying a stale one.
  const timer: TimerInfo | null =
    connected && state.phase_ends_at !== null
      ? { endsAt: state.phase_ends_at, serverNow: state.now }
      : null;

  return {
    screen: phase,
    title: labels[SCREEN_TITLE_KEYS[phase]] ?? phase,
    labels,
    rosterNames: state.roster.filter((p) => p.active).map((p) => p.display_name),
    highlightId: state.current_participant_id,
    speakerName: participantName(state, state.current_participant_id),
    themeTitle: state.theme ? state.theme.titles[locale] ?? null : null,
    themeTitles: state.themes.filter((t) => t.active).map((t) => t.titles[locale] ?? t.id),
    topicKeyword,
    imagePath,
    timer,
    confirmPendingName: state.pending_registration?.name ?? null,
    heldTopic: state.pending_topic
      ? {
          participantId: state.pending_topic.participant_id,
          keyword: state.pending_topic.keyword,
          reason: state.pending_topic.reason,
        }
      : null,
    showReady: phase === "preparation" || phase === "qa_preparation",
    showTypedInput: phase === "registration" || phase === "topic_collection",
    closingMessage: phase === "closing" ? labels.closing_message ?? null : null,
    reconnectBanner: !connected,
  };
}

/** Seconds left on the countdown; interpolates between server events and
 * never goes negative. wallAtSnapshotMs is when the snapshot arrived. */
export function remainingSeconds(
  timer: TimerInfo,
  wallNowMs: number,
  wallAtSnapshotMs: number,
): number {
  const elapsed = (wallNowMs - wallAtSnapshotMs) / 1000;
  return Math.max(0, timer.endsAt - timer.serverNow - elapsed);
}

export function formatClock(seconds: number): string {
  const whole = Math.ceil(seconds);
  const minutes = Math.floor(whole / 60);
  const rest = whole % 60;
  return `${minutes}:${String(rest).padStart(2, "0")}`;
}
