import { ApiClient } from "./api.js";
import { buildFinalCard, buildUtteranceCard, Card, ErrorCard, FinalCard } from "./cards.js";
import { EMOTIONS, ProbMap, StreamEvent } from "./types.js";

export type Phase = "idle" | "uploading" | "processing" | "done" | "error";

const ZERO_THRESHOLDS = Object.fromEntries(EMOTIONS.map((e) => [e, 0])) as ProbMap;

// Drives the whole demo page: left pane (upload / Submit / Clear) and
// right pane (streaming utterance cards, then the final averaged card).
export class UiState {
  phase: Phase = "idle";
  jobId?: string;
  utteranceCards: Card[] = [];
  finalCard?: FinalCard | ErrorCard;
  errorMessage?: string;

  private thresholds: ProbMap = ZERO_THRESHOLDS;

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: () => void = () => {},
  ) {}

  get submitEnabled(): boolean {
    return this.phase === "idle" || this.phase === "error";
  }

  get clearEnabled(): boolean {
    return this.phase === "done" || this.phase === "error";
  }

  async submit(file: File | Blob, name: string): Promise<void> {
    if (!this.submitEnabled) return; // Submit is disabled mid-job
    this.reset();
    this.phase = "uploading";
    this.onChange();
    try {
      this.jobId = await this.api.uploadJob(file, name);
      this.phase = "processing";
      this.onChange();
      await this.api.streamEvents(this.jobId, (event) => this.handleEvent(event));
      if (this.phase === "processing") {
        this.phase = this.errorMessage === undefined ? "done" : "error";
      }
    } catch (exc) {
      this.errorMessage = exc instanceof Error ? exc.message : String(exc);
      this.phase = "error";
    }
    this.onChange();
  }

  async clear(): Promise<void> {
    if (!this.clearEnabled) return;
    const jobId = this.jobId;
    if (jobId !== undefined) {
      try {
        await this.api.deleteJob(jobId);
      } catch (exc) {
        console.warn(`job delete failed, clearing locally: ${exc}`);
      }
    }
    this.reset();
    this.onChange();
  }

  private reset(): void {
    this.phase = "idle";
    this.jobId = undefined;
    this.utteranceCards = [];
    this.finalCard = undefined;
    this.errorMessage = undefined;
    this.thresholds = ZERO_THRESHOLDS;
  }

  private handleEvent(event: unknown): void {
    const type = (event as Partial<StreamEvent>).type;
    if (type === "utterance") {
      const card = buildUtteranceCard(event, this.jobId ?? "");
      if (card.kind === "utterance") {
        this.thresholds = Object.fromEntries(
          card.bars.map((b) => [b.emotion, b.threshold]),
        ) as ProbMap;
      }
      this.utteranceCards.push(card);
    } else if (type === "utterance_error") {
      const message = (event as { message?: string }).message ?? "utterance failed";
      this.utteranceCards.push({ kind: "error", message });
    } else if (type === "final") {
      this.finalCard = buildFinalCard(event, this.thresholds);
    } else if (type === "error") {
      this.errorMessage = (event as { message?: string }).message ?? "processing failed";
    } else {
      // Malformed line: inline error block, the stream continues.
      this.utteranceCards.push({
        kind: "error",
        message: `malformed event: ${JSON.stringify(event)}`,
      });
    }
    this.onChange();
  }
}
