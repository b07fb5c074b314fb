import { EMOTIONS, Emotion, FinalEvent, ProbMap, UtteranceEvent } from "./types.js";

export type Bar = {
  emotion: Emotion;
  prob: number;
  threshold: number; // rendered as a dotted marker on the bar
  highlighted: boolean; // strictly above threshold
};

export type UtteranceCard = {
  kind: "utterance";
  index: number;
  startS: number;
  endS: number;
  transcript: string;
  bars: Bar[];
  faceUrls: string[]; // the 5 face crops the model saw
  audioUrl: string; // the audio slice the model heard
  diagnostics: string[];
};

export type FinalCard = {
  kind: "final";
  status: "ok" | "no_speech";
  bars: Bar[];
};

// An unparseable or malformed event renders as an inline error block in
// place of a card; the stream keeps going.
export type ErrorCard = {
  kind: "error";
  message: string;
};

export type Card = UtteranceCard | FinalCard | ErrorCard;

export function buildBars(probs: ProbMap, thresholds: ProbMap): Bar[] {
  return EMOTIONS.map((emotion) => {
    const prob = probs[emotion];
    const threshold = thresholds[emotion];
    return { emotion, prob, threshold, highlighted: prob > threshold };
  });
}

function hasProbMap(value: unknown): value is ProbMap {
  if (typeof value !== "object" || value === null) return false;
  return EMOTIONS.every((e) => typeof (value as Record<string, unknown>)[e] === "number");
}

export function buildUtteranceCard(event: unknown, jobId: string): UtteranceCard | ErrorCard {
  const ev = event as Partial<UtteranceEvent>;
  if (
    typeof ev.index !== "number" ||
    !hasProbMap(ev.probs) ||
    !hasProbMap(ev.thresholds)
  ) {
    return { kind: "error", message: `malformed utterance event: ${JSON.stringify(event)}` };
  }
  const base = `/api/jobs/${jobId}/utterances/${ev.index}`;
  return {
    kind: "utterance",
    index: ev.index,
    startS: ev.start_s ?? 0,
    endS: ev.end_s ?? 0,
    transcript: ev.transcript ?? "",
    bars: buildBars(ev.probs, ev.thresholds),
    faceUrls: [0, 1, 2, 3, 4].map((j) => `${base}/faces/${j}.png`),
    audioUrl: `${base}/audio.wav`,
    diagnostics: ev.diagnostics ?? [],
  };
}

export function buildFinalCard(event: unknown, thresholds: ProbMap): FinalCard | ErrorCard {
  const ev = event as Partial<FinalEvent>;
  if (!hasProbMap(ev.avg_probs) || (ev.status !== "ok" && ev.status !== "no_speech")) {
    return { kind: "error", message: `malformed final event: ${JSON.stringify(event)}` };
  }
  return { kind: "final", status: ev.status, bars: buildBars(ev.avg_probs, thresholds) };
}

export function highlightedEmotions(bars: Bar[]): Emotion[] {
  return bars.filter((b) => b.highlighted).map((b) => b.emotion);
}
