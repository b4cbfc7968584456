// Web Speech wrapper. Recognized text goes to the caller; every failure path
// funnels into onUnavailable so the typed fail-safe can take over.

export interface SpeechCapture {
  supported: boolean;
  start(): void;
  stop(): void;
}

type RecognitionCtor = new () => any;

function recognitionConstructor(): RecognitionCtor | null {
  const w = globalThis as any;
  return w.SpeechRecognition ?? w.webkitSpeechRecognition ?? null;
}

export function createSpeechCapture(
  lang: string,
  onText: (text: string) => void,
  onUnavailable: (reason: string) => void,
): SpeechCapture {
  const Ctor = recognitionConstructor();
  if (!Ctor) {
    return {
      supported: false,
      start: () => onUnavailable("speech recognition not supported"),
      stop: () => {},
    };
  }
  const recognition = new Ctor();
  recognition.continuous = true;
  recognition.interimResults = false;
  recognition.lang = lang;
  recognition.onresult = (event: any) => {
    const result = event.results[event.results.length - 1];
    const transcript = result?.[0]?.transcript?.trim();
    if (transcript) onText(transcript);
  };
  recognition.onerror = (event: any) => {
    if (event.error === "not-allowed" || event.error === "service-not-allowed") {
      onUnavailable("microphone permission denied");
    }
  };
  let active = false;
  recognition.onend = () => {
    if (active) recognition.start(); // keep listening across utterances
  };
  return {
    supported: true,
    start: () => {
      active = true;
      recognition.start();
    },
    stop: () => {
      active = false;
      recognition.stop();
    },
  };
}
