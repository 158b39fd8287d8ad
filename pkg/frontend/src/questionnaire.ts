// Pre-/post-task questionnaire form: every defined item is required,
// answers validate per kind, and each (task, phase) submits at most once.

import { AnswerValue, ApiError, JudgmentApi } from "./api.js";

export type AnswerKind = "yes_no" | "integer" | "free_text";

export interface QuestionnaireItemDef {
  item_id: string;
  prompt: string;
  answer_kind: AnswerKind;
}

export type FormStatus = "editing" | "submitting" | "submitted" | "already-submitted";

export class QuestionnaireForm {
  readonly answers = new Map<string, AnswerValue>();
  readonly errors = new Map<string, string>();
  status: FormStatus = "editing";
  submitError: string | null = null;

  constructor(readonly items: QuestionnaireItemDef[]) {}

  /** Validate and store one raw input; invalid input records an inline
   * message and clears any previous answer for that item. */
  setAnswer(itemId: string, raw: string | boolean): void {
    const item = this.items.find((i) => i.item_id === itemId);
    if (item === undefined) return;
    this.errors.delete(itemId);
    switch (item.answer_kind) {
      case "yes_no": {
        if (typeof raw === "boolean") {
          this.answers.set(itemId, raw);
        } else if (raw === "yes" || raw === "no") {
          this.answers.set(itemId, raw === "yes");
        } else {
          this.answers.delete(itemId);
          this.errors.set(itemId, "answer yes or no");
        }
        return;
      }
      case "integer": {
        const text = String(raw).trim();
        if (/^-?\d+$/.test(text)) {
          this.answers.set(itemId, parseInt(text, 10));
        } else {
          this.answers.delete(itemId);
          this.errors.set(itemId, text === "" ? "required" : "enter a whole number");
        }
        return;
      }
      case "free_text": {
        const text = String(raw).trim();
        if (text !== "") {
          this.answers.set(itemId, text);
        } else {
          this.answers.delete(itemId);
          this.errors.set(itemId, "required");
        }
        return;
      }
    }
  }

  /** All items answered and valid; fills in "required" messages for
   * anything untouched so the form can render them inline. */
  validate(): boolean {
    for (const item of this.items) {
      if (!this.answers.has(item.item_id) && !this.errors.has(item.item_id)) {
        this.errors.set(item.item_id, "required");
      }
    }
    return this.items.every((item) => this.answers.has(item.item_id));
  }

  complete(): boolean {
    return this.items.every((item) => this.answers.has(item.item_id));
  }

  async submit(api: JudgmentApi, taskId: string, phase: "pre" | "post"): Promise<boolean> {
    if (this.status === "submitted" || this.status === "already-submitted") return false;
    if (!this.validate()) return false;
    this.status = "submitting";
    this.submitError = null;
    try {
      await api.submitQuestionnaire(taskId, phase, Object.fromEntries(this.answers));
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.status = "already-submitted";
        return false;
      }
      this.status = "editing";
      this.submitError = err instanceof Error ? err.message : "submission failed";
      return false;
    }
    this.status = "submitted";
    return true;
  }
}
