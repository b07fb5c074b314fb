import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { UiState } from "../src/state.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const DATA = join(HERE, "..", "..", "tests", "data");

function goldenEvents(name: string): unknown[] {
  return readFileSync(join(DATA, name), "utf8")
    .split("\n")
    .filter((l) => l !== "")
    .map((l) => JSON.parse(l));
}

class MockApi implements ApiClient {
  uploads = 0;
  deleted: string[] = [];
  uploadError?: Error;
  deleteError?: Error;
  private release?: () => void;

  constructor(private readonly events: unknown[]) {}

  // keeps the stream open until releaseStream() is called
  hold = false;

  async uploadJob(): Promise<string> {
    if (this.uploadError) throw this.uploadError;
    this.uploads += 1;
    return `job-${this.uploads}`;
  }

  async streamEvents(_jobId: string, onEvent: (event: unknown) => void): Promise<void> {
    for (const event of this.events) onEvent(event);
    if (this.hold) {
      await new Promise<void>((resolve) => {
        this.release = resolve;
      });
    }
  }

  releaseStream(): void {
    this.release?.();
  }

  async deleteJob(jobId: string): Promise<void> {
    if (this.deleteError) throw this.deleteError;
    this.deleted.push(jobId);
  }
}

const FILE = new Blob(["bundle"]);

describe("UiState", () => {
  it("streams two cards then the final card and lands in done", async () => {
    const state = new UiState(new MockApi(goldenEvents("golden_two_utt.ndjson")));
    await state.submit(FILE, "two_utt.zip");
    expect(state.phase).toBe("done");
    expect(state.utteranceCards.map((c) => c.kind)).toEqual(["utterance", "utterance"]);
    expect(state.finalCard?.kind).toBe("final");
    expect(state.clearEnabled).toBe(true);
  });

  it("surfaces upload failures as the error phase with Submit re-enabled", async () => {
    const api = new MockApi([]);
    api.uploadError = new Error("upload too large");
    const state = new UiState(api);
    await state.submit(FILE, "big.zip");
    expect(state.phase).toBe("error");
    expect(state.errorMessage).toBe("upload too large");
    expect(state.submitEnabled).toBe(true);
  });

  it("rejects submit while a job is in flight", async () => {
    const api = new MockApi(goldenEvents("golden_one_utt.ndjson"));
    api.hold = true;
    const state = new UiState(api);
    const first = state.submit(FILE, "a.zip");
    await Promise.resolve(); // let the upload start
    expect(state.submitEnabled).toBe(false);
    await state.submit(FILE, "b.zip"); // ignored: button disabled
    api.releaseStream();
    await first;
    expect(api.uploads).toBe(1);
    expect(state.phase).toBe("done");
  });

  it("clear deletes the job server-side and returns to an empty idle state", async () => {
    const api = new MockApi(goldenEvents("golden_two_utt.ndjson"));
    const state = new UiState(api);
    await state.submit(FILE, "two_utt.zip");
    await state.clear();
    expect(api.deleted).toEqual(["job-1"]);
    expect(state.phase).toBe("idle");
    expect(state.utteranceCards).toEqual([]);
    expect(state.finalCard).toBeUndefined();
    expect(state.jobId).toBeUndefined();
  });

  it("clear still resets locally when the delete fails", async () => {
    const api = new MockApi(goldenEvents("golden_one_utt.ndjson"));
    api.deleteError = new Error("410 Gone");
    const state = new UiState(api);
    await state.submit(FILE, "one_utt.zip");
    await state.clear();
    expect(state.phase).toBe("idle");
    expect(state.utteranceCards).toEqual([]);
  });

  it("clear then submit starts a fresh job", async () => {
    const api = new MockApi(goldenEvents("golden_one_utt.ndjson"));
    const state = new UiState(api);
    await state.submit(FILE, "a.zip");
    await state.clear();
    await state.submit(FILE, "a.zip");
    expect(state.jobId).toBe("job-2");
    expect(state.phase).toBe("done");
  });

  it("renders malformed events as inline error blocks and keeps streaming", async () => {
    const events = goldenEvents("golden_two_utt.ndjson");
    events.splice(1, 0, { type: "utterance", index: 99 }); // missing probs
    const state = new UiState(new MockApi(events));
    await state.submit(FILE, "two_utt.zip");
    expect(state.phase).toBe("done");
    expect(state.utteranceCards.map((c) => c.kind)).toEqual([
      "utterance",
      "error",
      "utterance",
    ]);
    expect(state.finalCard?.kind).toBe("final");
  });

  it("a terminal error event moves the job to the error phase", async () => {
    const state = new UiState(
      new MockApi([{ type: "error", message: "decode failed" }]),
    );
    await state.submit(FILE, "bad.zip");
    expect(state.phase).toBe("error");
    expect(state.errorMessage).toBe("decode failed");
  });

  it("handles a no-speech final card", async () => {
    const state = new UiState(
      new MockApi([
        {
          type: "final",
          status: "no_speech",
          avg_probs: {
            anger: 0, disgust: 0, fear: 0, happiness: 0, sadness: 0, surprise: 0,
          },
          active: [],
        },
      ]),
    );
    await state.submit(FILE, "silence.zip");
    expect(state.phase).toBe("done");
    expect(state.utteranceCards).toEqual([]);
    expect(state.finalCard?.kind).toBe("final");
  });
});
