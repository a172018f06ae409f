// Typed client for the labeling service. This is the UI's only data path:
// every piece of rendered state originates from these four endpoints.

export interface Frame {
  t: number;
  pos: number[];
  vel?: number;
  goal?: number[];
}

export interface RatingTicket {
  ticket_id: number;
  kind: "rating";
  frames: Frame[];
  n: number;
  budget_remaining?: number;
}

export interface PreferenceTicket {
  ticket_id: number;
  kind: "preference";
  frame_pairs: Frame[][];
  n: number;
  budget_remaining?: number;
}

export type Ticket = RatingTicket | PreferenceTicket;

export interface Stats {
  labels_total: number;
  class_counts: number[];
  budget_remaining: number;
}

export interface CurveRow {
  step: number;
  mean_gt_return: number;
  std_gt_return: number;
  mean_learned_return: number;
}

export interface Answer {
  ticket_id: number;
  class?: number;
  preferred?: "first" | "second";
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body);
  } catch {
    return response.statusText;
  }
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  /** Next pending ticket, or null when the queue is empty (204). */
  async nextTicket(): Promise<Ticket | null> {
    const response = await fetch(`${this.baseUrl}/api/ticket`);
    if (response.status === 204) return null;
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    return (await response.json()) as Ticket;
  }

  /** Submits one answer; throws ApiError with the service status on 409/422. */
  async submitAnswer(answer: Answer): Promise<void> {
    const response = await fetch(`${this.baseUrl}/api/answer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(answer),
    });
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
  }

  async stats(): Promise<Stats> {
    const response = await fetch(`${this.baseUrl}/api/stats`);
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    return (await response.json()) as Stats;
  }

  async curve(): Promise<CurveRow[]> {
    const response = await fetch(`${this.baseUrl}/api/curve`);
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    const body = await response.json();
    return body.rows as CurveRow[];
  }
}
