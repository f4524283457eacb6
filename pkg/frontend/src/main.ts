import { Client } from "./api";
import {
  answersPayload,
  initialState,
  withConstraint,
  withError,
  withResult,
  withSelection,
  withSummary,
  type ViewState,
} from "./state";
import {
  renderClarificationPanel,
  renderFailure,
  renderInputPanel,
  renderResultPanel,
} from "./render";
import type { DatabaseInfo, ExampleInfo } from "./types";

const client = new Client("");

let state: ViewState = initialState();
let examples: ExampleInfo[] = [];
let databases: DatabaseInfo[] = [];
let pickedExampleId: string | null = null;
let showVerdict = false;

function setState(next: ViewState): void {
  state = next;
  render();
}

async function startSession(question: string, dialect: string, databaseId: string): Promise<void> {
  if (state.pending) return;
  setState({ ...state, pending: true, error: null });
  try {
    const summary = await client.createSession({
      question,
      dialect,
      database_id: databaseId,
      ...(pickedExampleId ? { example_id: pickedExampleId } : {}),
    });
    showVerdict = false;
    setState(withSummary(state, summary));
    if (summary.state === "resolved") {
      await loadResult(summary.session_id);
    }
  } catch (error) {
    setState(withError(state, String(error)));
  }
}

async function submitAnswers(): Promise<void> {
  const summary = state.summary;
  if (!summary || state.pending) return;
  setState({ ...state, pending: true, error: null });
  try {
    const updated = await client.submitAnswers(summary.session_id, answersPayload(state));
    setState(withSummary(state, updated));
    if (updated.state === "resolved") {
      await loadResult(updated.session_id);
    }
  } catch (error) {
    setState(withError(state, String(error)));
  }
}

async function loadResult(sessionId: string): Promise<void> {
  try {
    const result = await client.getResult(sessionId);
    setState(withResult(state, result));
  } catch (error) {
    setState(withError(state, String(error)));
  }
}

function render(): void {
  const app = document.getElementById("app");
  if (!app) return;
  app.replaceChildren();

  app.append(
    renderInputPanel(examples, databases, {
      onPickExample: (exampleId) => {
        pickedExampleId = exampleId;
      },
      onSubmit: (question, dialect, databaseId) => {
        void startSession(question, dialect, databaseId);
      },
    }),
  );

  if (state.phase === "failed") {
    app.append(renderFailure("The question could not be fully disambiguated."));
  }

  app.append(
    renderClarificationPanel(state, {
      onSelect: (questionId, key) => setState(withSelection(state, questionId, key)),
      onConstraint: (text) => {
        state = withConstraint(state, text); // no re-render while typing
      },
      onSubmit: () => {
        void submitAnswers();
      },
    }),
  );

  app.append(
    renderResultPanel(state.result, showVerdict, {
      onCompare: () => {
        showVerdict = true;
        render();
      },
    }),
  );

  if (state.error) {
    app.append(renderFailure(state.error));
  }
}

async function bootstrap(): Promise<void> {
  [examples, databases] = await Promise.all([client.listExamples(), client.listDatabases()]);
  render();
}

void bootstrap();
