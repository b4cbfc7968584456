// Wire types mirroring the server's JSON bodies.

export type Phase =
  | "home"
  | "registration"
  | "session_selection"
  | "topic_collection"
  | "preparation"
  | "speaking"
  | "qa_preparation"
  | "qa"
  | "closing";

export interface ImageRefView {
  source_url: string;
  local_path: string;
  query: string;
  provider: string;
  fetched_at: number;
}

export interface TopicView {
  participant_id: string;
  keyword: string;
  image: ImageRefView | null;
  source: string;
}

export interface ParticipantView {
  id: string;
  display_name: string;
  active: boolean;
  registered_via: string;
  seat_order: number;
}

export interface ThemeView {
  id: string;
  titles: Record<string, string>;
  active: boolean;
}

export interface ConfigView {
  locale: string;
  prep_before_speaking_s: number | null;
  speaking_slot_s: number;
  qa_slot_s: number;
  qa_prep_timed: boolean;
}

export interface StateView {
  session_id: string;
  phase: Phase;
  slot_index: number;
  current_participant_id: string | null;
  theme: { id: string; titles: Record<string, string> } | null;
  config: ConfigView;
  roster: ParticipantView[];
  session_roster: string[];
  topics: Record<string, TopicView>;
  pending_registration: { name: string; via: string } | null;
  pending_topic: { participant_id: string; keyword: string; reason: string } | null;
  themes: ThemeView[];
  phase_entered_at: number;
  phase_ends_at: number | null;
  now: number;
  seq: number;
  completed_sessions: string[];
}

export interface SessionEvent {
  seq: number;
  at: number;
  kind: "transition" | "timer" | "attempt";
  name: string;
  payload: Record<string, unknown>;
}

export interface LocalePackView {
  locale: string;
  labels: Record<string, string>;
  commands: Record<string, string[]>;
}

export interface UtteranceResult {
  command: string;
  context: string;
  extracted?: string;
  state: StateView;
  seq: number;
}
