// Mirrors of the server's documented JSON payloads.  The console holds no
// query logic of its own: every rendered fact traces back to one of these
// fields.

export interface ValidationReport {
  ok: boolean;
  mode: "paper" | "strict";
  missing_tables: string[];
  unknown_columns: string[];
  syntax_error: string | null;
}

export type Row = Record<string, unknown>;

export interface QueryResponse {
  query: string;
  dialect: string;
  validation: ValidationReport;
  columns: string[];
  rows: Row[];
  summary: string;
  attempts: number;
  session_id?: string;
}

export interface ApiErrorPayload {
  error: {
    code: string;
    message: string;
    detail?: unknown;
  };
}

export interface ErRelationship {
  from: string;
  to: string;
  cardinality: "many_to_one" | "one_to_one";
  via: string;
}

export interface SchemaPayload {
  tables: Record<string, string>;
  collections: Record<string, string>;
  er: {
    entities: string[];
    relationships: ErRelationship[];
  };
}

export interface SessionResponse {
  session_id: string;
}

/** One finished interaction, exactly as displayed. */
export interface ConsoleTurn {
  question: string;
  ok: boolean;
  status: number;
  response?: QueryResponse;
  error?: ApiErrorPayload["error"];
  parentIndex?: number;
}
