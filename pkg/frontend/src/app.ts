// DOM layer for the judging screen. Plain re-render on every state
// change; the state machine in judging.ts owns all the rules, this file
// only reflects them.

import { JudgingScreenState, JudgingSession, GRADED_MAX, GRADED_MIN } from "./judging.js";

const GRADED_ENDPOINT_CAPTIONS: Record<number, string> = {
  [GRADED_MIN]: "completely irrelevant",
  [GRADED_MAX]: "completely relevant",
};

export function renderJudging(container: HTMLElement, session: JudgingSession): void {
  const state = session.state;
  container.replaceChildren();
  switch (state.phase) {
    case "loading":
      container.append(el("p", { id: "status" }, "Loading the next result..."));
      return;
    case "error":
      renderError(container, session, state);
      return;
    case "done":
      container.append(
        el("h2", { id: "status" }, "All results judged. Thank you!"),
        progressLine(state),
      );
      return;
    case "judging":
      renderItem(container, session, state);
      return;
  }
}

function renderItem(
  container: HTMLElement,
  session: JudgingSession,
  state: JudgingScreenState,
): void {
  const item = state.item;
  if (item === null) return;

  container.append(progressLine(state));
  container.append(el("h2", { id: "item-title" }, item.title || item.url));
  container.append(el("p", { id: "item-snippet" }, item.snippet));
  // results open in a new tab: many sites refuse to be framed, and the
  // judging panel must stay visible alongside the page
  const link = el("a", { id: "item-link", href: item.url }, "Open this result");
  link.setAttribute("target", "_blank");
  link.setAttribute("rel", "noopener noreferrer");
  container.append(link);

  const binaryBlock = el("fieldset", { id: "binary-block" });
  binaryBlock.append(el("legend", {}, "Is this result relevant to your task?"));
  for (const value of ["yes", "no"] as const) {
    const button = el(
      "button",
      { id: `binary-${value}`, type: "button" },
      value === "yes" ? "Relevant" : "Not relevant",
    ) as HTMLButtonElement;
    if (state.binary === value) button.setAttribute("aria-pressed", "true");
    button.addEventListener("click", () => session.setBinary(value));
    binaryBlock.append(button);
  }
  container.append(binaryBlock);

  const gradedBlock = el("fieldset", { id: "graded-block" });
  gradedBlock.append(el("legend", {}, "How relevant, on a scale of 1 to 5?"));
  for (let point = GRADED_MIN; point <= GRADED_MAX; point += 1) {
    const caption = GRADED_ENDPOINT_CAPTIONS[point];
    const button = el(
      "button",
      { id: `graded-${point}`, type: "button" },
      caption ? `${point} (${caption})` : String(point),
    ) as HTMLButtonElement;
    button.disabled = !session.gradedEnabled();
    if (state.graded === point) button.setAttribute("aria-pressed", "true");
    button.addEventListener("click", () => session.setGraded(point));
    gradedBlock.append(button);
  }
  container.append(gradedBlock);

  const submit = el("button", { id: "submit", type: "button" }, "Submit judgment") as HTMLButtonElement;
  submit.disabled = !session.canSubmit();
  submit.addEventListener("click", () => void session.submit());
  container.append(submit);

  if (state.error !== null) {
    container.append(errorBanner(session, state));
  }
}

function renderError(
  container: HTMLElement,
  session: JudgingSession,
  state: JudgingScreenState,
): void {
  container.append(el("p", { id: "status" }, "Could not reach the study server."));
  container.append(errorBanner(session, state));
}

function errorBanner(session: JudgingSession, state: JudgingScreenState): HTMLElement {
  const banner = el("div", { id: "error-banner" });
  banner.append(el("p", {}, state.error ?? "something went wrong"));
  const retry = el("button", { id: "retry", type: "button" }, "Retry") as HTMLButtonElement;
  retry.addEventListener("click", () => void session.retry());
  banner.append(retry);
  return banner;
}

function progressLine(state: JudgingScreenState): HTMLElement {
  return el(
    "p",
    { id: "progress" },
    `${state.progress.judged} of ${state.progress.total} judged`,
  );
}

function el(
  tag: string,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) node.textContent = text;
  return node;
}
