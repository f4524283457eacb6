/** Payload types mirroring the session API. Every displayed fact comes
 * from one of these; the client never infers ambiguities or SQL itself. */

export interface ExampleInfo {
  example_id: string;
  label: string;
  question: string;
  dialect: string;
  database_id: string;
}

export interface DatabaseInfo {
  database_id: string;
  dialect: string;
  tables: string[];
  file_backed: boolean;
}

export interface Snippet {
  table: string;
  column: string;
  description: string | null;
  values: string[];
}

export interface ClarificationOption {
  key: string;
  display: string;
  resolution: string;
  snippet: Snippet | null;
}

export interface ClarificationQuestion {
  id: string;
  ambiguity_id: string;
  text: string;
  options: ClarificationOption[];
}

export type SessionPhase = "detecting" | "awaiting_answers" | "resolved" | "failed";

export interface SessionSummary {
  session_id: string;
  state: SessionPhase;
  iteration: number;
  original_question: string;
  rewritten_question: string;
  database_id: string;
  dialect: string;
  open_questions: ClarificationQuestion[];
  constraint_log: string[];
  preference_tree: Record<string, unknown[]>;
  has_gold: boolean;
}

export interface SqlSide {
  sql: string | null;
  error: string | null;
}

export interface Divergence {
  index: number;
  gold: string | null;
  pred: string | null;
}

export interface CompareReport {
  exact: boolean;
  execution: boolean | null;
  first_divergence: Divergence | null;
  notes: string;
}

export interface SessionResult {
  session_id: string;
  rewritten_question: string;
  preference_snapshot: Record<string, unknown[]>;
  generated_sql_without: SqlSide;
  generated_sql_with: SqlSide;
  comparison: {
    gold_sql: string;
    without: CompareReport | null;
    with: CompareReport | null;
  } | null;
}

export interface AnswerPayload {
  question_id: string;
  selected_key: string;
}

export interface SubmitPayload {
  answers: AnswerPayload[];
  additional_constraints: string[];
}
