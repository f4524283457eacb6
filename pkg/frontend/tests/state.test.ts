import { describe, expect, it } from "vitest";

import {
  answersPayload,
  canSubmit,
  clarificationDisabled,
  initialState,
  phaseFor,
  withConstraint,
  withSelection,
  withSummary,
} from "../src/state";
import { awaitingSummary, resolvedSummary } from "./fixtures";

describe("phase transitions", () => {
  it("starts in the input phase with panel 2 disabled", () => {
    const state = initialState();
    expect(state.phase).toBe("input");
    expect(clarificationDisabled(state)).toBe(true);
  });

  it("maps session states onto view phases", () => {
    expect(phaseFor(awaitingSummary())).toBe("clarifying");
    expect(phaseFor(resolvedSummary())).toBe("resolved");
    expect(phaseFor({ ...resolvedSummary(), state: "failed" })).toBe("failed");
  });

  it("disables the clarification panel when nothing is open", () => {
    const state = withSummary(initialState(), resolvedSummary());
    expect(clarificationDisabled(state)).toBe(true);
  });
});

describe("submit guard", () => {
  it("requires a selection for every dropdown", () => {
    let state = withSummary(initialState(), awaitingSummary());
    expect(canSubmit(state)).toBe(false);
    state = withSelection(state, "q0-0", "B");
    expect(canSubmit(state)).toBe(false);
    state = withSelection(state, "q0-1", "A");
    expect(canSubmit(state)).toBe(true);
  });

  it("blocks while a mutation is in flight", () => {
    let state = withSummary(initialState(), awaitingSummary());
    state = withSelection(withSelection(state, "q0-0", "B"), "q0-1", "A");
    expect(canSubmit({ ...state, pending: true })).toBe(false);
  });

  it("never submits from a phase the API would reject", () => {
    const state = withSummary(initialState(), resolvedSummary());
    expect(canSubmit(state)).toBe(false);
  });
});

describe("answers payload", () => {
  it("carries one answer per question plus the trimmed constraint", () => {
    let state = withSummary(initialState(), awaitingSummary());
    state = withSelection(withSelection(state, "q0-0", "B"), "q0-1", "A");
    state = withConstraint(state, "  drivers need to be German  ");
    const payload = answersPayload(state);
    expect(payload.answers).toEqual([
      { question_id: "q0-0", selected_key: "B" },
      { question_id: "q0-1", selected_key: "A" },
    ]);
    expect(payload.additional_constraints).toEqual(["drivers need to be German"]);
  });

  it("omits an empty constraint", () => {
    let state = withSummary(initialState(), awaitingSummary());
    state = withSelection(withSelection(state, "q0-0", "A"), "q0-1", "B");
    expect(answersPayload(state).additional_constraints).toEqual([]);
  });

  it("resets selections when a new summary arrives", () => {
    let state = withSummary(initialState(), awaitingSummary());
    state = withSelection(state, "q0-0", "A");
    state = withSummary(state, awaitingSummary());
    expect(state.selections).toEqual({});
  });
});
