// Thin HTTP client for the judgment service's juror endpoints. The
// server never sends provenance to jurors, and nothing here adds any:
// these types are the complete client-side vocabulary.

export interface JurorItem {
  item_id: string;
  url: string;
  title: string;
  snippet: string;
}

export interface Progress {
  judged: number;
  total: number;
}

export interface NextItemResponse {
  done: boolean;
  item: JurorItem | null;
  progress: Progress;
}

export interface Credentials {
  participant_id: string;
  token: string;
}

export type AnswerValue = boolean | number | string;

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Server said no: carries the HTTP status so callers can branch on
 * conflict (409) versus validation (422) versus auth (403). */
export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class JudgmentApi {
  constructor(
    private readonly baseUrl: string,
    private readonly credentials: Credentials,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private authQuery(): string {
    return new URLSearchParams({
      participant_id: this.credentials.participant_id,
      token: this.credentials.token,
    }).toString();
  }

  async nextItem(poolId: string): Promise<NextItemResponse> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/v1/pools/${encodeURIComponent(poolId)}/next?${this.authQuery()}`,
    );
    await raiseForStatus(response);
    return response.json();
  }

  async progress(poolId: string): Promise<Progress> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/v1/pools/${encodeURIComponent(poolId)}/progress?${this.authQuery()}`,
    );
    await raiseForStatus(response);
    return response.json();
  }

  async submitJudgment(
    poolId: string,
    itemId: string,
    binary: boolean,
    graded: number,
  ): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/judgments`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        pool_id: poolId,
        item_id: itemId,
        ...this.credentials,
        binary,
        graded,
        judged_at: Date.now(),
      }),
    });
    await raiseForStatus(response);
  }

  async submitQuestionnaire(
    taskId: string,
    phase: "pre" | "post",
    answers: Record<string, AnswerValue>,
  ): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/questionnaires`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        ...this.credentials,
        task_id: taskId,
        phase,
        answers,
        submitted_at: Date.now(),
      }),
    });
    await raiseForStatus(response);
  }
}
