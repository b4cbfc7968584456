// DOM rendering. One screen visible at a time, large type, high contrast,
// never more than two primary actions on screen. During rounds the enlarged
// image sits on the left; timer, speaker, theme, and topic on the right.

import type { ScreenState } from "./projection";
import { formatClock } from "./projection";

export interface UiHandlers {
  onRegister(): void;
  onStartSession(): void;
  onBack(): void;
  onConfirm(): void;
  onReady(): void;
  onTypedSubmit(value: string): void;
  onThemePick(title: string): void;
  mediaUrl(localPath: string): string;
}

function el(tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

export function renderScreen(
  root: HTMLElement,
  state: ScreenState,
  remaining: number | null,
  handlers: UiHandlers,
): void {
  root.textContent = "";

  if (state.reconnectBanner) {
    root.appendChild(el("div", { id: "reconnect-banner", class: "banner" }, "Reconnecting…"));
  }

  const screen = el("section", { id: "screen", "data-phase": state.screen, class: `screen ${state.screen}` });
  root.appendChild(screen);
  screen.appendChild(el("h1", { id: "title" }, state.title));

  const labels = state.labels;

  switch (state.screen) {
    case "home": {
      const menu = el("div", { class: "menu" });
      const register = el("button", { id: "register-button", class: "big" }, labels.home_register_option);
      register.addEventListener("click", handlers.onRegister);
      const session = el("button", { id: "session-button", class: "big" }, labels.home_session_option);
      session.addEventListener("click", handlers.onStartSession);
      menu.append(register, session);
      screen.appendChild(menu);
      break;
    }

    case "registration": {
      if (state.confirmPendingName) {
        screen.appendChild(
          el("p", { id: "confirm-prompt", class: "prompt" },
            `${labels.confirm_prompt} “${state.confirmPendingName}”`),
        );
        const confirm = el("button", { id: "confirm-button", class: "big" }, labels.save_button);
        confirm.addEventListener("click", handlers.onConfirm);
        screen.appendChild(confirm);
      }
      // The typed fail-safe stays available even while a name awaits
      // confirmation, so the facilitator can always overrule.
      appendTypedInput(screen, labels, handlers);
      appendRoster(screen, state);
      appendBack(screen, labels, handlers);
      break;
    }

    case "session_selection": {
      const options = el("div", { id: "theme-options", class: "menu" });
      for (const title of state.themeTitles) {
        const pick = el("button", { class: "big theme" }, title);
        pick.addEventListener("click", () => handlers.onThemePick(title));
        options.appendChild(pick);
      }
      screen.appendChild(options);
      appendBack(screen, labels, handlers);
      break;
    }

    case "topic_collection": {
      screen.appendChild(el("p", { id: "speaker-name", class: "prompt" }, state.speakerName ?? ""));
      if (state.heldTopic) {
        screen.appendChild(
          el("p", { id: "held-topic", class: "banner" },
            `${state.heldTopic.keyword}: ${state.heldTopic.reason}`),
        );
      }
      if (state.imagePath) {
        screen.appendChild(
          el("img", { id: "topic-image", src: handlers.mediaUrl(state.imagePath), alt: state.topicKeyword ?? "" }),
        );
      }
      appendTypedInput(screen, labels, handlers);
      break;
    }

    case "preparation":
    case "qa_preparation": {
      if (state.timer && remaining !== null) {
        screen.appendChild(el("div", { id: "timer", class: "clock" }, formatClock(remaining)));
      }
      const ready = el("button", { id: "ready-button", class: "big" }, labels.ready_button);
      ready.addEventListener("click", handlers.onReady);
      screen.appendChild(ready);
      break;
    }

    case "speaking":
    case "qa": {
      const row = el("div", { class: "round" });
      const left = el("div", { class: "round-left" });
      if (state.imagePath) {
        left.appendChild(
          el("img", { id: "round-image", src: handlers.mediaUrl(state.imagePath), alt: state.topicKeyword ?? "" }),
        );
      }
      const right = el("div", { class: "round-right" });
      if (state.timer && remaining !== null) {
        right.appendChild(el("div", { id: "timer", class: "clock" }, formatClock(remaining)));
      }
      right.appendChild(el("p", { id: "speaker-name" }, `${labels.speaker_label}: ${state.speakerName ?? ""}`));
      right.appendChild(el("p", { id: "theme-title" }, `${labels.theme_label}: ${state.themeTitle ?? ""}`));
      right.appendChild(el("p", { id: "topic-keyword" }, `${labels.topic_label}: ${state.topicKeyword ?? ""}`));
      row.append(left, right);
      screen.appendChild(row);
      break;
    }

    case "closing": {
      screen.appendChild(el("p", { id: "closing-message", class: "prompt" }, state.closingMessage ?? ""));
      break;
    }
  }

  root.appendChild(el("div", { id: "notice", class: "notice" }));
}

function appendTypedInput(screen: HTMLElement, labels: Record<string, string>, handlers: UiHandlers): void {
  const form = el("div", { class: "typed" });
  form.appendChild(el("p", { class: "hint" }, labels.typed_fallback_hint));
  const input = el("input", { id: "typed-input", type: "text" }) as HTMLInputElement;
  const save = el("button", { id: "save-button", class: "big" }, labels.save_button);
  save.addEventListener("click", () => {
    if (input.value.trim()) handlers.onTypedSubmit(input.value.trim());
    input.value = "";
  });
  form.append(input, save);
  screen.appendChild(form);
}

function appendRoster(screen: HTMLElement, state: ScreenState): void {
  const roster = el("ul", { id: "roster" });
  for (const name of state.rosterNames) {
    roster.appendChild(el("li", {}, name));
  }
  screen.appendChild(roster);
}

function appendBack(screen: HTMLElement, labels: Record<string, string>, handlers: UiHandlers): void {
  const back = el("button", { id: "back-button" }, labels.back_button);
  back.addEventListener("click", handlers.onBack);
  screen.appendChild(back);
}

export function showNotice(root: HTMLElement, message: string): void {
  const notice = root.querySelector("#notice");
  if (notice) notice.textContent = message;
}

export function focusTypedInput(root: HTMLElement): void {
  const input = root.querySelector<HTMLInputElement>("#typed-input");
  input?.focus();
}
