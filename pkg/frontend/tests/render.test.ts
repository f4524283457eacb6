// @vitest-environment jsdom
import { describe, expect, it, vi } from "vitest";

import {
  renderClarificationPanel,
  renderInputPanel,
  renderResultPanel,
} from "../src/render";
import { initialState, withSelection, withSummary } from "../src/state";
import { awaitingSummary, resolvedSummary, resultFixture } from "./fixtures";
import type { DatabaseInfo, ExampleInfo } from "../src/types";

const EXAMPLES: ExampleInfo[] = [
  {
    example_id: "fo-ranked-2",
    label: "[TAG] ranked 2 example",
    question: "How many drivers born after the end of the Vietnam War have been ranked 2?",
    dialect: "sqlite",
    database_id: "formula_one",
  },
];

const DATABASES: DatabaseInfo[] = [
  { database_id: "formula_one", dialect: "sqlite", tables: ["drivers"], file_backed: true },
  { database_id: "california_schools", dialect: "sqlite", tables: ["schools"], file_backed: false },
];

function noopClarify() {
  return { onSelect: vi.fn(), onConstraint: vi.fn(), onSubmit: vi.fn() };
}

describe("input panel", () => {
  it("prefills question, dialect, and database from the example picker", () => {
    const onPickExample = vi.fn();
    const panel = renderInputPanel(EXAMPLES, DATABASES, { onPickExample, onSubmit: vi.fn() });
    document.body.replaceChildren(panel);
    const picker = panel.querySelector<HTMLSelectElement>("#example-picker")!;
    picker.value = "fo-ranked-2";
    picker.dispatchEvent(new Event("change"));
    expect(panel.querySelector<HTMLTextAreaElement>("#question")!.value).toContain("ranked 2");
    expect(panel.querySelector<HTMLSelectElement>("#database")!.value).toBe("formula_one");
    expect(onPickExample).toHaveBeenCalledWith("fo-ranked-2");
  });

  it("hides the picker when there are no examples", () => {
    const panel = renderInputPanel([], DATABASES, { onPickExample: vi.fn(), onSubmit: vi.fn() });
    expect(panel.querySelector("#example-picker")).toBeNull();
  });

  it("validates an empty question instead of submitting", () => {
    const onSubmit = vi.fn();
    const panel = renderInputPanel(EXAMPLES, DATABASES, { onPickExample: vi.fn(), onSubmit });
    document.body.replaceChildren(panel);
    panel.querySelector<HTMLButtonElement>("#start-session")!.click();
    expect(onSubmit).not.toHaveBeenCalled();
    expect(panel.querySelector("#input-validation")!.textContent).toContain("Enter a question");
  });
});

describe("clarification panel", () => {
  it("renders one dropdown per open question with evidence tables", () => {
    const state = withSummary(initialState(), awaitingSummary());
    const panel = renderClarificationPanel(state, noopClarify());
    const dropdowns = panel.querySelectorAll("select.answer");
    expect(dropdowns).toHaveLength(2);
    // snippet-bearing options show their evidence as small tables
    const snippets = panel.querySelectorAll(".snippet");
    expect(snippets.length).toBeGreaterThanOrEqual(2);
    expect(panel.textContent).toContain("results.rank");
    expect(panel.textContent).toContain("race rank");
  });

  it("keeps submit disabled until every dropdown has a selection", () => {
    let state = withSummary(initialState(), awaitingSummary());
    let panel = renderClarificationPanel(state, noopClarify());
    expect(panel.querySelector<HTMLButtonElement>("#submit-answers")!.disabled).toBe(true);
    state = withSelection(withSelection(state, "q0-0", "B"), "q0-1", "A");
    panel = renderClarificationPanel(state, noopClarify());
    expect(panel.querySelector<HTMLButtonElement>("#submit-answers")!.disabled).toBe(false);
  });

  it("shows the selected option's resolution and snippet", () => {
    let state = withSummary(initialState(), awaitingSummary());
    state = withSelection(state, "q0-0", "B");
    const panel = renderClarificationPanel(state, noopClarify());
    expect(panel.textContent).toContain(
      "Use the rank column of the results table for 'ranked 2'.",
    );
  });

  it("renders disabled when no questions are open", () => {
    const state = withSummary(initialState(), resolvedSummary());
    const panel = renderClarificationPanel(state, noopClarify());
    expect(panel.classList.contains("disabled")).toBe(true);
    expect(panel.querySelector("select")).toBeNull();
    expect(panel.textContent).toContain("No clarification needed");
  });

  it("forwards dropdown changes", () => {
    const handlers = noopClarify();
    const state = withSummary(initialState(), awaitingSummary());
    const panel = renderClarificationPanel(state, handlers);
    document.body.replaceChildren(panel);
    const dropdown = panel.querySelector<HTMLSelectElement>("select.answer")!;
    dropdown.value = "B";
    dropdown.dispatchEvent(new Event("change"));
    expect(handlers.onSelect).toHaveBeenCalledWith("q0-0", "B");
  });
});

describe("result panel", () => {
  it("shows both SQL panes and the rewritten question banner", () => {
    const panel = renderResultPanel(resultFixture(), false, { onCompare: vi.fn() });
    expect(panel.querySelectorAll(".sql-pane")).toHaveLength(2);
    expect(panel.querySelector("#rewrite-banner")!.textContent).toContain("1975-04-30");
    expect(panel.querySelector("#verdicts")).toBeNull(); // verdict hidden until Compare
    expect(panel.querySelector<HTMLButtonElement>("#compare")).not.toBeNull();
  });

  it("reveals match badges and highlights the diverging token on Compare", () => {
    const panel = renderResultPanel(resultFixture(), true, { onCompare: vi.fn() });
    const badges = panel.querySelectorAll(".badge");
    expect(badges).toHaveLength(2);
    expect(panel.querySelector(".badge-mismatch")!.textContent).toBe("mismatch");
    expect(panel.querySelector(".badge-match")!.textContent).toBe("exact match");
    const mark = panel.querySelector("mark.divergence")!;
    expect(mark.textContent).toBe("position");
  });

  it("hides Compare when there is no gold", () => {
    const result = { ...resultFixture(), comparison: null };
    const panel = renderResultPanel(result, false, { onCompare: vi.fn() });
    expect(panel.querySelector("#compare")).toBeNull();
  });

  it("renders a per-pane error card and keeps the other pane usable", () => {
    const result = resultFixture();
    result.generated_sql_without = { sql: null, error: "generator timed out" };
    const panel = renderResultPanel(result, false, { onCompare: vi.fn() });
    expect(panel.querySelectorAll(".error-card")).toHaveLength(1);
    expect(panel.textContent).toContain("generator timed out");
    expect(panel.textContent).toContain("SELECT COUNT(*) FROM results WHERE rank = 2");
  });

  it("renders a disabled placeholder before resolution", () => {
    const panel = renderResultPanel(null, false, { onCompare: vi.fn() });
    expect(panel.classList.contains("disabled")).toBe(true);
  });
});
