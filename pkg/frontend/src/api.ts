import { NdjsonParser } from "./ndjson.js";

// The UI talks to the job service exclusively through these calls.
export interface ApiClient {
  uploadJob(file: File | Blob, name: string): Promise<string>; // -> job id
  streamEvents(jobId: string, onEvent: (event: unknown) => void): Promise<void>;
  deleteJob(jobId: string): Promise<void>;
}

export class HttpApiClient implements ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async uploadJob(file: File | Blob, name: string): Promise<string> {
    const form = new FormData();
    form.append("file", file, name);
    const resp = await fetch(`${this.baseUrl}/api/jobs`, { method: "POST", body: form });
    if (!resp.ok) {
      throw new Error(await errorMessage(resp));
    }
    const body = (await resp.json()) as { job_id: string };
    return body.job_id;
  }

  async streamEvents(jobId: string, onEvent: (event: unknown) => void): Promise<void> {
    const resp = await fetch(`${this.baseUrl}/api/jobs/${jobId}/events`);
    if (!resp.ok || resp.body === null) {
      throw new Error(await errorMessage(resp));
    }
    const parser = new NdjsonParser();
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      parser.push(decoder.decode(value, { stream: true }), onEvent);
    }
    parser.flush(onEvent);
  }

  async deleteJob(jobId: string): Promise<void> {
    const resp = await fetch(`${this.baseUrl}/api/jobs/${jobId}`, { method: "DELETE" });
    // 410 means it is already gone, which is fine for Clear.
    if (!resp.ok && resp.status !== 410) {
      throw new Error(await errorMessage(resp));
    }
  }
}

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: string; message?: string };
    return body.detail ?? body.message ?? `HTTP ${resp.status}`;
  } catch {
    return `HTTP ${resp.status}`;
  }
}
