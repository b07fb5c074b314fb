export const EMOTIONS = [
  "anger",
  "disgust",
  "fear",
  "happiness",
  "sadness",
  "surprise",
] as const;

export type Emotion = (typeof EMOTIONS)[number];

export type ProbMap = Record<Emotion, number>;

export type UtteranceEvent = {
  type: "utterance";
  index: number;
  start_s: number;
  end_s: number;
  transcript: string;
  probs: ProbMap;
  active: Emotion[];
  thresholds: ProbMap;
  input_summary: { n_real_frames: number; audio_real_s: number; n_real_tokens: number };
  diagnostics?: string[];
};

export type UtteranceErrorEvent = {
  type: "utterance_error";
  index: number;
  message: string;
};

export type FinalEvent = {
  type: "final";
  status: "ok" | "no_speech";
  avg_probs: ProbMap;
  active: Emotion[];
};

export type JobErrorEvent = {
  type: "error";
  message: string;
};

export type StreamEvent = UtteranceEvent | UtteranceErrorEvent | FinalEvent | JobErrorEvent;
