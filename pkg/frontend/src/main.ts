// Browser entrypoint: wire speech capture and the microphone recorder into
// the controller. The API origin defaults to the page origin and can be
// overridden with ?api=http://host:port for development.

import { ApiClient } from "./api";
import { AppController } from "./controller";
import { browserMicrophone } from "./recorder";
import { createSpeechCapture } from "./speech";
import { showNotice } from "./ui";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("api") ?? window.location.origin;
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app");

  const api = new ApiClient(baseUrl);
  const controller = new AppController(root, api, { mediaSource: browserMicrophone() });
  await controller.start();

  const lang = controller.state?.config.locale === "ja" ? "ja-JP" : "en-US";
  const speech = createSpeechCapture(
    lang,
    (text) => void controller.handleUtterance(text),
    (reason) => showNotice(root, `voice unavailable (${reason}); please use the input field`),
  );
  speech.start();

  const toggle = document.getElementById("locale-toggle");
  toggle?.addEventListener("click", () => {
    const next = controller.pack?.locale === "en" ? "ja" : "en";
    void controller.setDisplayLocale(next);
  });
}

void boot();
