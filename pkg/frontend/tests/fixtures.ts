import type { SessionResult, SessionSummary } from "../src/types";

export function awaitingSummary(): SessionSummary {
  return {
    session_id: "s1",
    state: "awaiting_answers",
    iteration: 0,
    original_question: "How many drivers born after the end of the Vietnam War have been ranked 2?",
    rewritten_question: "How many drivers born after the end of the Vietnam War have been ranked 2?",
    database_id: "formula_one",
    dialect: "sqlite",
    open_questions: [
      {
        id: "q0-0",
        ambiguity_id: "a0-0",
        text: "Which column should 'ranked 2' refer to?",
        options: [
          {
            key: "A",
            display: "position column of results",
            resolution: "Use the position column of the results table for 'ranked 2'.",
            snippet: { table: "results", column: "position", description: null, values: ["1", "2", "3"] },
          },
          {
            key: "B",
            display: "rank column of results",
            resolution: "Use the rank column of the results table for 'ranked 2'.",
            snippet: { table: "results", column: "rank", description: "race rank", values: ["1", "2"] },
          },
        ],
      },
      {
        id: "q0-1",
        ambiguity_id: "a0-1",
        text: "Which time reference should 'end of the Vietnam War' use?",
        options: [
          {
            key: "A",
            display: "Exact end date (1975-04-30)",
            resolution: "Interpret the end of the Vietnam War as the exact date 1975-04-30.",
            snippet: null,
          },
          {
            key: "B",
            display: "End year (1975)",
            resolution: "Interpret the end of the Vietnam War as the year 1975.",
            snippet: null,
          },
        ],
      },
    ],
    constraint_log: [],
    preference_tree: {},
    has_gold: true,
  };
}

export function resolvedSummary(): SessionSummary {
  return {
    ...awaitingSummary(),
    state: "resolved",
    iteration: 0,
    open_questions: [],
  };
}

export function resultFixture(): SessionResult {
  return {
    session_id: "s1",
    rewritten_question: "How many drivers born after 1975-04-30 have rank 2 in the results table?",
    preference_snapshot: {},
    generated_sql_without: {
      sql: "SELECT COUNT(*) FROM results WHERE position = 2",
      error: null,
    },
    generated_sql_with: {
      sql: "SELECT COUNT(*) FROM results WHERE rank = 2",
      error: null,
    },
    comparison: {
      gold_sql: "SELECT COUNT(*) FROM results WHERE rank = 2",
      without: {
        exact: false,
        execution: false,
        first_divergence: { index: 6, gold: "rank", pred: "position" },
        notes: "",
      },
      with: { exact: true, execution: true, first_divergence: null, notes: "" },
    },
  };
}
