import { HttpApiClient } from "./api.js";
import { Bar, Card, ErrorCard, FinalCard } from "./cards.js";
import { UiState } from "./state.js";

const CHART_HEIGHT = 120;

function barChart(bars: Bar[]): HTMLElement {
  const chart = el("div", "chart");
  for (const bar of bars) {
    const slot = el("div", "slot");
    const column = el("div", "column");
    const fill = el("div", bar.highlighted ? "bar highlighted" : "bar");
    fill.style.height = `${Math.round(bar.prob * CHART_HEIGHT)}px`;
    fill.title = `${bar.emotion}: ${bar.prob.toFixed(3)}`;
    const marker = el("div", "threshold-marker"); // dotted line at the threshold
    marker.style.bottom = `${Math.round(bar.threshold * CHART_HEIGHT)}px`;
    column.append(fill, marker);
    const label = el("div", "label");
    label.textContent = bar.emotion;
    slot.append(column, label);
    chart.append(slot);
  }
  return chart;
}

function errorBlock(card: ErrorCard): HTMLElement {
  const block = el("div", "card error-card");
  block.textContent = card.message;
  return block;
}

function utteranceCard(card: Card): HTMLElement {
  if (card.kind !== "utterance") return errorBlock(card as ErrorCard);
  const root = el("div", "card");
  const title = el("h3");
  title.textContent = `Utterance ${card.index} (${card.startS.toFixed(2)}–${card.endS.toFixed(2)} s)`;
  root.append(title, barChart(card.bars));

  const faces = el("div", "faces");
  for (const url of card.faceUrls) {
    const img = document.createElement("img");
    img.src = url;
    img.loading = "lazy";
    img.alt = "face crop";
    faces.append(img);
  }
  const audio = document.createElement("audio");
  audio.controls = true;
  audio.src = card.audioUrl;
  const transcript = el("p", "transcript");
  transcript.textContent = card.transcript || "(no transcript)";
  root.append(faces, audio, transcript);
  for (const note of card.diagnostics) {
    const diag = el("p", "diagnostic");
    diag.textContent = note;
    root.append(diag);
  }
  return root;
}

function finalCard(card: FinalCard | ErrorCard): HTMLElement {
  if (card.kind !== "final") return errorBlock(card);
  const root = el("div", "card final-card");
  const title = el("h3");
  title.textContent = card.status === "ok" ? "Video average" : "No speech detected";
  root.append(title);
  if (card.status === "ok") root.append(barChart(card.bars));
  return root;
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}

export function mountApp(root: HTMLElement): UiState {
  const fileInput = document.createElement("input");
  fileInput.type = "file";
  const submitBtn = el("button") as HTMLButtonElement;
  submitBtn.textContent = "Submit";
  const clearBtn = el("button") as HTMLButtonElement;
  clearBtn.textContent = "Clear";
  const status = el("p", "status");
  const left = el("div", "pane left");
  left.append(fileInput, submitBtn, clearBtn, status);
  const right = el("div", "pane right");
  root.append(left, right);

  const state = new UiState(new HttpApiClient(), () => render());

  function render(): void {
    submitBtn.disabled = !state.submitEnabled;
    clearBtn.disabled = !state.clearEnabled;
    status.textContent =
      state.phase === "error" ? `Error: ${state.errorMessage ?? "unknown"}` : state.phase;
    right.replaceChildren(...state.utteranceCards.map(utteranceCard));
    if (state.finalCard) right.append(finalCard(state.finalCard));
  }

  submitBtn.addEventListener("click", () => {
    const file = fileInput.files?.[0];
    if (file) void state.submit(file, file.name);
  });
  clearBtn.addEventListener("click", () => {
    void state.clear().then(() => {
      fileInput.value = "";
    });
  });

  render();
  return state;
}
