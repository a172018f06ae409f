// Session state machine between the polling loop, the labeler's gestures,
// and the service. Framework-free: render code subscribes to onChange.

import { ApiClient, ApiError, Answer, CurveRow, Stats, Ticket } from "./api.js";

export type Phase = "connecting" | "idle" | "labeling" | "submitting" | "finished" | "offline";

export interface ViewState {
  phase: Phase;
  ticket: Ticket | null;
  stats: Stats | null;
  curve: CurveRow[];
  message: string | null;
}

export interface ControllerOptions {
  pollMs?: number;
  offlineBackoffMs?: number;
  now?: () => number;
}

export class SessionController {
  private state: ViewState = {
    phase: "connecting",
    ticket: null,
    stats: null,
    curve: [],
    message: null,
  };
  private submitting = false; // double-click guard: one in-flight answer max
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private readonly pollMs: number;
  private readonly offlineBackoffMs: number;
  readonly gestureLog: Answer[] = []; // audit trail: every POST has a gesture

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (state: ViewState) => void,
    options: ControllerOptions = {},
  ) {
    this.pollMs = options.pollMs ?? 1000;
    this.offlineBackoffMs = options.offlineBackoffMs ?? 3000;
  }

  get view(): ViewState {
    return this.state;
  }

  private patch(update: Partial<ViewState>): void {
    this.state = { ...this.state, ...update };
    this.onChange(this.state);
  }

  async start(): Promise<void> {
    this.stopped = false;
    await this.refreshStats();
    await this.pollTicket();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
  }

  private schedule(fn: () => Promise<void>, delayMs: number): void {
    if (this.stopped) return;
    this.timer = setTimeout(() => void fn(), delayMs);
  }

  async pollTicket(): Promise<void> {
    if (this.stopped) return;
    if (this.state.ticket !== null && this.state.phase === "labeling") {
      // keep showing the current ticket; nothing to fetch
      this.schedule(() => this.pollTicket(), this.pollMs);
      return;
    }
    try {
      const ticket = await this.api.nextTicket();
      if (ticket === null) {
        const finished = (this.state.stats?.budget_remaining ?? 1) <= 0;
        this.patch({ phase: finished ? "finished" : "idle", ticket: null });
        this.schedule(() => this.pollTicket(), this.pollMs);
      } else {
        this.patch({ phase: "labeling", ticket, message: null });
        this.schedule(() => this.pollTicket(), this.pollMs);
      }
    } catch (error) {
      this.patch({ phase: "offline", message: describe(error) });
      this.schedule(() => this.pollTicket(), this.offlineBackoffMs);
    }
  }

  /** Rating gesture; ignored unless a rating ticket is on screen. */
  async submitRating(classIndex: number): Promise<void> {
    const ticket = this.state.ticket;
    if (!ticket || ticket.kind !== "rating") return;
    if (classIndex < 0 || classIndex >= ticket.n) return;
    await this.submit({ ticket_id: ticket.ticket_id, class: classIndex });
  }

  /** Preference gesture; ignored unless a preference ticket is on screen. */
  async submitPreference(side: "first" | "second"): Promise<void> {
    const ticket = this.state.ticket;
    if (!ticket || ticket.kind !== "preference") return;
    await this.submit({ ticket_id: ticket.ticket_id, preferred: side });
  }

  private async submit(answer: Answer): Promise<void> {
    if (this.submitting) return; // guard: drop repeat gestures
    this.submitting = true;
    this.gestureLog.push(answer);
    this.patch({ phase: "submitting" });
    try {
      await this.api.submitAnswer(answer);
      this.patch({ ticket: null, message: null });
      await this.refreshStats();
      await this.advance();
    } catch (error) {
      if (error instanceof ApiError && (error.status === 409 || error.status === 422)) {
        // surfaced, non-blocking: drop the stale ticket and refetch
        this.patch({ ticket: null, message: `${error.status}: ${error.message}` });
        await this.advance();
      } else {
        this.patch({ phase: "offline", message: describe(error) });
        this.schedule(() => this.pollTicket(), this.offlineBackoffMs);
      }
    } finally {
      this.submitting = false;
    }
  }

  private async advance(): Promise<void> {
    try {
      const ticket = await this.api.nextTicket();
      if (ticket === null) {
        const finished = (this.state.stats?.budget_remaining ?? 1) <= 0;
        this.patch({ phase: finished ? "finished" : "idle", ticket: null });
        this.schedule(() => this.pollTicket(), this.pollMs);
      } else {
        this.patch({ phase: "labeling", ticket });
      }
    } catch (error) {
      this.patch({ phase: "offline", message: describe(error) });
      this.schedule(() => this.pollTicket(), this.offlineBackoffMs);
    }
  }

  async refreshStats(): Promise<void> {
    try {
      const [stats, curve] = await Promise.all([this.api.stats(), this.api.curve()]);
      this.patch({ stats, curve });
    } catch {
      // stats are cosmetic; the ticket loop handles connectivity state
    }
  }
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}

/** Descriptive class labels for small n, index order low to high. */
export function classLabels(n: number): string[] {
  const named: Record<number, string[]> = {
    2: ["bad", "good"],
    3: ["bad", "neutral", "good"],
    4: ["very bad", "bad", "good", "very good"],
    5: ["very bad", "bad", "ok", "good", "very good"],
  };
  if (named[n]) return named[n];
  return Array.from({ length: n }, (_, i) => `class ${i}`);
}
