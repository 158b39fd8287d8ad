// Judging screen state machine: one item at a time, binary answer
// strictly before graded, server-driven ordering via next_item.

import { ApiError, JudgmentApi, JurorItem, Progress } from "./api.js";

export type BinaryAnswer = "unset" | "yes" | "no";

export type JudgingPhase = "loading" | "judging" | "done" | "error";

export interface JudgingScreenState {
  phase: JudgingPhase;
  item: JurorItem | null;
  progress: Progress;
  binary: BinaryAnswer;
  graded: number | null; // 1..5, null while unset
  error: string | null; // retryable failure message, answers preserved
}

export const GRADED_MIN = 1;
export const GRADED_MAX = 5;

function freshAnswers(state: JudgingScreenState): void {
  state.binary = "unset";
  state.graded = null;
}

/** One juror working through one pool. The client never orders or
 * filters items: every advance asks the server for the next one. */
export class JudgingSession {
  readonly state: JudgingScreenState = {
    phase: "loading",
    item: null,
    progress: { judged: 0, total: 0 },
    binary: "unset",
    graded: null,
    error: null,
  };

  constructor(
    private readonly api: JudgmentApi,
    private readonly poolId: string,
    private readonly onChange: (state: JudgingScreenState) => void = () => {},
  ) {}

  private notify(): void {
    this.onChange(this.state);
  }

  /** Load the first unjudged item; safe to call after a page reload. */
  async start(): Promise<void> {
    this.state.phase = "loading";
    this.state.error = null;
    this.notify();
    await this.advance();
  }

  private async advance(): Promise<void> {
    try {
      const next = await this.api.nextItem(this.poolId);
      this.state.progress = next.progress;
      freshAnswers(this.state);
      if (next.done) {
        this.state.phase = "done";
        this.state.item = null;
      } else {
        this.state.phase = "judging";
        this.state.item = next.item;
      }
      this.state.error = null;
    } catch (err) {
      this.state.phase = "error";
      this.state.error = describeFailure(err);
    }
    this.notify();
  }

  setBinary(value: "yes" | "no"): void {
    if (this.state.phase !== "judging") return;
    this.state.binary = value;
    this.notify();
  }

  /** Ignored until a binary answer exists: graded is a refinement of
   * the binary decision, never a substitute for it. */
  setGraded(value: number): void {
    if (this.state.phase !== "judging" || !this.gradedEnabled()) return;
    if (!Number.isInteger(value) || value < GRADED_MIN || value > GRADED_MAX) return;
    this.state.graded = value;
    this.notify();
  }

  gradedEnabled(): boolean {
    return this.state.phase === "judging" && this.state.binary !== "unset";
  }

  canSubmit(): boolean {
    return (
      this.state.phase === "judging" &&
      this.state.binary !== "unset" &&
      this.state.graded !== null
    );
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || this.state.item === null) return;
    const { item } = this.state;
    try {
      await this.api.submitJudgment(
        this.poolId,
        item.item_id,
        this.state.binary === "yes",
        this.state.graded as number,
      );
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone (or an earlier tab) already judged it: skip forward
        await this.advance();
        return;
      }
      // network trouble or a server error: keep the entered answers so
      // the juror can retry without re-deciding
      this.state.error = describeFailure(err);
      this.notify();
      return;
    }
    await this.advance();
  }

  /** Retry after a failure without losing entered answers. */
  async retry(): Promise<void> {
    if (this.state.phase === "error") {
      await this.start();
      return;
    }
    await this.submit();
  }
}

function describeFailure(err: unknown): string {
  if (err instanceof ApiError) return `request rejected (${err.status}): ${err.message}`;
  if (err instanceof Error) return `connection problem: ${err.message}`;
  return "connection problem";
}
