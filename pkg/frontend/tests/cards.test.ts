import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import {
  buildBars,
  buildFinalCard,
  buildUtteranceCard,
  highlightedEmotions,
} from "../src/cards.js";
import { EMOTIONS, FinalEvent, ProbMap, UtteranceEvent } from "../src/types.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const DATA = join(HERE, "..", "..", "tests", "data");

function goldenEvents(name: string): unknown[] {
  return readFileSync(join(DATA, name), "utf8")
    .split("\n")
    .filter((l) => l !== "")
    .map((l) => JSON.parse(l));
}

function probMap(values: number[]): ProbMap {
  return Object.fromEntries(EMOTIONS.map((e, i) => [e, values[i]])) as ProbMap;
}

describe("bar highlighting", () => {
  it("uses the strict > rule: prob equal to threshold is not highlighted", () => {
    const bars = buildBars(probMap([0.5, 0.5, 0.5, 0.5, 0.5, 0.5]), probMap([0.5, 0.5, 0.5, 0.5, 0.5, 0.5]));
    expect(highlightedEmotions(bars)).toEqual([]);
  });

  it("highlights a bar strictly above its threshold", () => {
    const probs = probMap([0.9, 0.1, 0.1, 0.1, 0.1, 0.1]);
    const bars = buildBars(probs, probMap([0.5, 0.5, 0.5, 0.5, 0.5, 0.5]));
    expect(highlightedEmotions(bars)).toEqual(["anger"]);
  });

  it.each(["golden_one_utt.ndjson", "golden_two_utt.ndjson"])(
    "highlight sets equal the server active sets in %s",
    (name) => {
      for (const event of goldenEvents(name)) {
        const ev = event as UtteranceEvent | FinalEvent;
        if (ev.type === "utterance") {
          const card = buildUtteranceCard(ev, "job");
          expect(card.kind).toBe("utterance");
          if (card.kind === "utterance") {
            expect(highlightedEmotions(card.bars)).toEqual(ev.active);
          }
        } else if (ev.type === "final") {
          const thresholds = probMap([0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
          const card = buildFinalCard(ev, thresholds);
          expect(card.kind).toBe("final");
          if (card.kind === "final") {
            expect(highlightedEmotions(card.bars)).toEqual(ev.active);
          }
        }
      }
    },
  );
});

describe("card building", () => {
  it("builds face and audio URLs scoped to the job", () => {
    const [event] = goldenEvents("golden_two_utt.ndjson");
    const card = buildUtteranceCard(event, "abc123");
    expect(card.kind).toBe("utterance");
    if (card.kind === "utterance") {
      expect(card.faceUrls).toHaveLength(5);
      expect(card.faceUrls[0]).toBe("/api/jobs/abc123/utterances/0/faces/0.png");
      expect(card.audioUrl).toBe("/api/jobs/abc123/utterances/0/audio.wav");
      expect(card.transcript).toBe("i am happy");
    }
  });

  it("replaces a malformed event with an inline error block", () => {
    const card = buildUtteranceCard({ type: "utterance", index: 0 }, "job");
    expect(card.kind).toBe("error");
  });

  it("final averaged bars equal the mean of the utterance bars", () => {
    const events = goldenEvents("golden_two_utt.ndjson") as (UtteranceEvent | FinalEvent)[];
    const utterances = events.filter((e): e is UtteranceEvent => e.type === "utterance");
    const final = events.find((e): e is FinalEvent => e.type === "final")!;
    for (const emotion of EMOTIONS) {
      const mean =
        utterances.reduce((acc, u) => acc + u.probs[emotion], 0) / utterances.length;
      // the stream renders probabilities with 6 decimals
      expect(Math.abs(final.avg_probs[emotion] - mean)).toBeLessThan(1e-6);
    }
  });
});
