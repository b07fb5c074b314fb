// Incremental NDJSON parser tolerant of arbitrary chunk boundaries:
// buffer until a newline, emit one parsed value per complete line.
export class NdjsonParser {
  private buffer = "";

  push(chunk: string, onValue: (value: unknown) => void): void {
    this.buffer += chunk;
    for (;;) {
      const idx = this.buffer.indexOf("\n");
      if (idx === -1) return;
      const line = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 1);
      emitLine(line, onValue);
    }
  }

  // Call once at end-of-stream for a final line without a trailing newline.
  flush(onValue: (value: unknown) => void): void {
    const line = this.buffer;
    this.buffer = "";
    emitLine(line, onValue);
  }
}

function emitLine(line: string, onValue: (value: unknown) => void): void {
  const trimmed = line.trim();
  if (trimmed === "") return;
  let value: unknown;
  try {
    value = JSON.parse(trimmed);
  } catch {
    value = { type: "malformed", raw: trimmed };
  }
  onValue(value);
}
