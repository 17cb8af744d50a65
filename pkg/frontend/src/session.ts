/**
 * Session state machine for the demo loop: populate the paper text (upload
 * or paste), optionally edit the review template, generate, watch the review
 * stream in.
 *
 * Invariants kept here rather than in the DOM layer:
 *  - generation is available only when the paper text is nonempty and no
 *    stream is open (status idle, done, or error);
 *  - the rendered review always equals the concatenation of received deltas;
 *  - the paper text cannot change while a stream is open.
 */

import type { GenerateResult, StreamFrame, TemplateSummary } from "./api.js";
import { ServiceError } from "./api.js";

export type GenerationStatus = "idle" | "converting" | "generating" | "done" | "error";

export interface SessionState {
  paperText: string;
  templateId: string;
  templateText: string;
  status: GenerationStatus;
  review: string;
  errorMessage: string;
}

/** The slice of ServiceClient the controller needs; tests inject fakes. */
export interface ServiceApi {
  convert(file: Blob, filename: string): Promise<string>;
  listTemplates(): Promise<TemplateSummary[]>;
  getTemplate(venueId: string): Promise<string>;
  putTemplate(venueId: string, text: string): Promise<void>;
  generate(paperText: string, templateId: string): Promise<GenerateResult>;
  generateStream(
    paperText: string,
    templateId: string,
    onFrame: (frame: StreamFrame) => void,
  ): Promise<string>;
}

export type Listener = (state: SessionState) => void;

export class SessionController {
  private state: SessionState = {
    paperText: "",
    templateId: "iclr-default",
    templateText: "",
    status: "idle",
    review: "",
    errorMessage: "",
  };
  private listeners: Listener[] = [];

  constructor(private readonly service: ServiceApi) {}

  getState(): SessionState {
    return { ...this.state };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.getState());
  }

  canGenerate(): boolean {
    const { paperText, status } = this.state;
    return paperText.trim().length > 0 && (status === "idle" || status === "done" || status === "error");
  }

  /** Paste path; ignored while a stream is open so the paper stays fixed. */
  setPaperText(text: string): void {
    if (this.state.status === "generating") return;
    this.update({ paperText: text });
  }

  setTemplateId(venueId: string): void {
    this.update({ templateId: venueId });
  }

  async uploadAndConvert(file: Blob, filename: string): Promise<void> {
    this.update({ status: "converting", errorMessage: "" });
    try {
      const markdown = await this.service.convert(file, filename);
      this.update({ paperText: markdown, status: "idle" });
    } catch (error) {
      // conversion failure: surface the service's error code, paper text untouched
      this.update({ status: "error", errorMessage: describeError(error) });
    }
  }

  async loadTemplate(venueId?: string): Promise<void> {
    const id = venueId ?? this.state.templateId;
    const text = await this.service.getTemplate(id);
    this.update({ templateId: id, templateText: text });
  }

  /** PUT the edited text, then GET it back so the accordion shows the round trip. */
  async saveTemplate(text: string): Promise<void> {
    const venueId = venueIdOf(text);
    await this.service.putTemplate(venueId, text);
    const stored = await this.service.getTemplate(venueId);
    this.update({ templateId: venueId, templateText: stored });
  }

  async generate(): Promise<string> {
    if (!this.canGenerate()) {
      throw new Error("generation unavailable: empty paper text or a stream is already open");
    }
    this.update({ status: "generating", review: "", errorMessage: "" });
    const onFrame = (frame: StreamFrame) => {
      if (frame.kind === "delta") {
        this.update({ review: this.state.review + frame.text });
      } else if (frame.kind === "done") {
        this.update({ status: "done" });
      } else {
        // partial review is retained and flagged
        this.update({
          status: "error",
          errorMessage: `${frame.code ?? "stream_error"}: ${frame.message ?? "stream failed"}`,
        });
      }
    };
    try {
      return await this.service.generateStream(this.state.paperText, this.state.templateId, onFrame);
    } catch (error) {
      if (this.state.status === "generating") {
        this.update({ status: "error", errorMessage: describeError(error) });
      }
      throw error;
    }
  }
}

export function venueIdOf(templateText: string): string {
  for (const line of templateText.split("\n")) {
    const match = /^venue:\s*(.+)$/.exec(line.trim());
    if (match && match[1]) return match[1].trim();
  }
  throw new Error("template text has no 'venue:' line");
}

function describeError(error: unknown): string {
  if (error instanceof ServiceError) return `${error.code}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}
