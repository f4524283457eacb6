import type {
  ClarificationQuestion,
  CompareReport,
  DatabaseInfo,
  ExampleInfo,
  SessionResult,
  Snippet,
  SqlSide,
} from "./types";
import { canSubmit, clarificationDisabled, type ViewState } from "./state";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export interface InputHandlers {
  onPickExample(exampleId: string): void;
  onSubmit(question: string, dialect: string, databaseId: string): void;
}

/** Panel 1: question, dialect, database, and the example picker that
 * prefills all three. */
export function renderInputPanel(
  examples: ExampleInfo[],
  databases: DatabaseInfo[],
  handlers: InputHandlers,
): HTMLElement {
  const panel = el("section", "panel");
  panel.id = "panel-input";
  panel.append(el("h2", "", "1. Ask a question"));

  const question = el("textarea");
  question.id = "question";
  question.rows = 2;
  question.placeholder = "Natural-language question about the selected database";

  const dialect = el("select");
  dialect.id = "dialect";
  for (const name of ["sqlite", "mysql", "postgresql"]) {
    const option = el("option", "", name);
    option.value = name;
    dialect.append(option);
  }

  const database = el("select");
  database.id = "database";
  for (const db of databases) {
    const option = el("option", "", db.database_id);
    option.value = db.database_id;
    database.append(option);
  }

  if (examples.length > 0) {
    const picker = el("select");
    picker.id = "example-picker";
    const placeholder = el("option", "", "Pick an example question...");
    placeholder.value = "";
    picker.append(placeholder);
    for (const example of examples) {
      const option = el("option", "", example.label);
      option.value = example.example_id;
      picker.append(option);
    }
    picker.addEventListener("change", () => {
      const chosen = examples.find((e) => e.example_id === picker.value);
      if (!chosen) return;
      question.value = chosen.question;
      dialect.value = chosen.dialect;
      database.value = chosen.database_id;
      handlers.onPickExample(chosen.example_id);
    });
    const row = el("div", "row");
    row.append(picker);
    panel.append(row);
  }

  const validation = el("p", "validation");
  validation.id = "input-validation";

  const submit = el("button", "", "Analyze");
  submit.id = "start-session";
  submit.addEventListener("click", () => {
    if (!question.value.trim()) {
      validation.textContent = "Enter a question first.";
      return;
    }
    validation.textContent = "";
    handlers.onSubmit(question.value, dialect.value, database.value);
  });

  const form = el("div", "row");
  form.append(question);
  const controls = el("div", "row");
  controls.append(el("label", "", "dialect"), dialect, el("label", "", "database"), database, submit);
  panel.append(form, controls, validation);
  return panel;
}

function snippetTable(snippet: Snippet): HTMLElement {
  const box = el("div", "snippet");
  const caption = snippet.description
    ? `${snippet.table}.${snippet.column} — ${snippet.description}`
    : `${snippet.table}.${snippet.column}`;
  box.append(el("div", "snippet-caption", caption));
  const table = el("table", "snippet-values");
  const row = el("tr");
  for (const value of snippet.values) {
    row.append(el("td", "", value));
  }
  table.append(row);
  box.append(table);
  return box;
}

export interface ClarifyHandlers {
  onSelect(questionId: string, key: string): void;
  onConstraint(text: string): void;
  onSubmit(): void;
}

/** Panel 2: one dropdown per open clarification question, evidence under
 * the selected option, and the auxiliary constraint field. Renders in a
 * disabled state when there is nothing to answer. */
export function renderClarificationPanel(state: ViewState, handlers: ClarifyHandlers): HTMLElement {
  const panel = el("section", "panel");
  panel.id = "panel-clarify";
  panel.append(el("h2", "", "2. Clarify your intent"));

  if (clarificationDisabled(state)) {
    panel.classList.add("disabled");
    const note = state.summary
      ? "No clarification needed — the question is unambiguous."
      : "Submit a question first.";
    panel.append(el("p", "note", note));
    return panel;
  }

  const summary = state.summary!;
  for (const question of summary.open_questions) {
    panel.append(renderQuestion(question, state.selections[question.id], handlers));
  }

  const constraintLabel = el("label", "", "Additional constraint (optional)");
  const constraint = el("input");
  constraint.id = "constraint";
  constraint.type = "text";
  constraint.placeholder = "e.g. drivers need to be German";
  constraint.value = state.constraint;
  constraint.addEventListener("input", () => handlers.onConstraint(constraint.value));

  const submit = el("button", "", "Submit clarifications");
  submit.id = "submit-answers";
  submit.disabled = !canSubmit(state);
  submit.addEventListener("click", () => handlers.onSubmit());

  const row = el("div", "row");
  row.append(constraintLabel, constraint, submit);
  panel.append(row);
  return panel;
}

function renderQuestion(
  question: ClarificationQuestion,
  selected: string | undefined,
  handlers: ClarifyHandlers,
): HTMLElement {
  const block = el("div", "question");
  block.dataset.questionId = question.id;
  block.append(el("p", "question-text", question.text));

  const dropdown = el("select", "answer");
  const placeholder = el("option", "", "Choose an option...");
  placeholder.value = "";
  if (selected === undefined) placeholder.selected = true;
  dropdown.append(placeholder);
  for (const option of question.options) {
    const node = el("option", "", `${option.key}) ${option.display}`);
    node.value = option.key;
    if (option.key === selected) node.selected = true;
    dropdown.append(node);
  }
  dropdown.addEventListener("change", () => {
    if (dropdown.value) handlers.onSelect(question.id, dropdown.value);
  });
  block.append(dropdown);

  const chosen = question.options.find((o) => o.key === selected);
  if (chosen) {
    block.append(el("p", "resolution", chosen.resolution));
    if (chosen.snippet) block.append(snippetTable(chosen.snippet));
  } else {
    // evidence preview for every snippet-bearing option
    for (const option of question.options) {
      if (option.snippet) block.append(snippetTable(option.snippet));
    }
  }
  return block;
}

function verdictBadge(report: CompareReport | null): HTMLElement {
  if (!report) return el("span", "badge badge-na", "no verdict");
  const badge = el(
    "span",
    report.exact ? "badge badge-match" : "badge badge-mismatch",
    report.exact ? "exact match" : "mismatch",
  );
  return badge;
}

function sqlPane(title: string, side: SqlSide, report: CompareReport | null): HTMLElement {
  const pane = el("div", "sql-pane");
  pane.append(el("h3", "", title));
  if (side.error) {
    pane.append(el("div", "error-card", `generator error: ${side.error}`));
    return pane;
  }
  const code = el("pre", "sql");
  const sql = side.sql ?? "";
  const divergent = report?.first_divergence?.pred ?? null;
  if (divergent && !report?.exact) {
    // highlight the first occurrence of the diverging token
    const index = sql.toLowerCase().indexOf(divergent.toLowerCase());
    if (index >= 0) {
      code.append(document.createTextNode(sql.slice(0, index)));
      const mark = el("mark", "divergence", sql.slice(index, index + divergent.length));
      code.append(mark, document.createTextNode(sql.slice(index + divergent.length)));
    } else {
      code.textContent = sql;
    }
  } else {
    code.textContent = sql;
  }
  pane.append(code);
  return pane;
}

export interface ResultHandlers {
  onCompare(): void;
}

/** Panel 3: the two generated SQL statements side by side, with the
 * Compare verdict (shown on demand, cached server-side). */
export function renderResultPanel(
  result: SessionResult | null,
  showVerdict: boolean,
  handlers: ResultHandlers,
): HTMLElement {
  const panel = el("section", "panel");
  panel.id = "panel-result";
  panel.append(el("h2", "", "3. Generated SQL"));
  if (!result) {
    panel.classList.add("disabled");
    panel.append(el("p", "note", "Resolve the question to generate SQL."));
    return panel;
  }

  const banner = el("p", "rewrite-banner");
  banner.id = "rewrite-banner";
  banner.textContent = result.rewritten_question;
  panel.append(banner);

  const withoutReport = result.comparison?.without ?? null;
  const withReport = result.comparison?.with ?? null;
  const panes = el("div", "sql-panes");
  panes.append(
    sqlPane("Without disambiguation", result.generated_sql_without, showVerdict ? withoutReport : null),
    sqlPane("With disambiguation", result.generated_sql_with, showVerdict ? withReport : null),
  );
  panel.append(panes);

  if (result.comparison) {
    const compare = el("button", "", "Compare");
    compare.id = "compare";
    compare.addEventListener("click", () => handlers.onCompare());
    panel.append(compare);
    if (showVerdict) {
      const verdicts = el("div", "verdicts");
      verdicts.id = "verdicts";
      const left = el("div", "verdict");
      left.append(el("span", "", "without: "), verdictBadge(withoutReport));
      const right = el("div", "verdict");
      right.append(el("span", "", "with: "), verdictBadge(withReport));
      verdicts.append(left, right);
      panel.append(verdicts);
    }
  }
  return panel;
}

/** Failure banner for sessions that hit the iteration cap or an upstream error. */
export function renderFailure(message: string): HTMLElement {
  const banner = el("div", "failure-banner", message);
  banner.id = "failure-banner";
  return banner;
}
