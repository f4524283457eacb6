import type { SessionResult, SessionSummary, SubmitPayload } from "./types";

export type Phase = "input" | "clarifying" | "resolved" | "failed";

/** Client-side mirror of the session; the API payloads are the source of
 * truth and every transition follows the server's state machine. */
export interface ViewState {
  phase: Phase;
  summary: SessionSummary | null;
  selections: Record<string, string>; // question id -> selected option key
  constraint: string;
  result: SessionResult | null;
  pending: boolean; // at most one in-flight mutation request
  error: string | null;
}

export function initialState(): ViewState {
  return {
    phase: "input",
    summary: null,
    selections: {},
    constraint: "",
    result: null,
    pending: false,
    error: null,
  };
}

export function phaseFor(summary: SessionSummary): Phase {
  switch (summary.state) {
    case "awaiting_answers":
      return "clarifying";
    case "resolved":
      return "resolved";
    case "failed":
      return "failed";
    case "detecting":
      return "clarifying";
  }
}

/** Install a fresh summary (from create or submit); selections reset to the
 * new set of open questions. */
export function withSummary(state: ViewState, summary: SessionSummary): ViewState {
  return {
    ...state,
    phase: phaseFor(summary),
    summary,
    selections: {},
    constraint: "",
    result: null,
    pending: false,
    error: null,
  };
}

export function withSelection(state: ViewState, questionId: string, key: string): ViewState {
  return { ...state, selections: { ...state.selections, [questionId]: key } };
}

export function withConstraint(state: ViewState, constraint: string): ViewState {
  return { ...state, constraint };
}

export function withResult(state: ViewState, result: SessionResult): ViewState {
  return { ...state, result, pending: false };
}

export function withError(state: ViewState, error: string): ViewState {
  return { ...state, error, pending: false };
}

/** Panel 2 renders disabled whenever there is nothing to answer. */
export function clarificationDisabled(state: ViewState): boolean {
  return !state.summary || state.summary.open_questions.length === 0;
}

/** Submit enables only when every dropdown has a selection. */
export function canSubmit(state: ViewState): boolean {
  if (state.pending || !state.summary || state.summary.state !== "awaiting_answers") {
    return false;
  }
  return state.summary.open_questions.every((q) => state.selections[q.id] !== undefined);
}

export function answersPayload(state: ViewState): SubmitPayload {
  const summary = state.summary;
  if (!summary) {
    throw new Error("no session to answer");
  }
  const constraint = state.constraint.trim();
  return {
    answers: summary.open_questions.map((q) => ({
      question_id: q.id,
      selected_key: state.selections[q.id],
    })),
    additional_constraints: constraint ? [constraint] : [],
  };
}
