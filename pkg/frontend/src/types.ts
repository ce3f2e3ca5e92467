// Wire types for the proxy's OpenAI surface and admin API.
// The UI never derives scores or versions itself; it renders these verbatim.

export interface ChatMessage {
  role: "system" | "user" | "assistant";
  content: string;
}

export interface ChatCompletionResponse {
  id: string;
  object: string;
  model: string;
  choices: { index: number; message: ChatMessage; finish_reason: string | null }[];
}

export interface SkillMeta {
  id: string;
  name: string;
  description: string;
  version: string;
  tags: string[];
  triggers: string[];
  examples: string[];
  confidence: number | null;
  scope: "user" | "common";
}

export interface SkillDoc extends SkillMeta {
  prompt: string;
}

export interface ScoredRow {
  skill_id: string;
  name: string;
  version: string;
  dense_raw: number;
  lexical_raw: number;
  dense_norm: number;
  lexical_norm: number;
  rel: number;
}

export interface EvolutionEntry {
  candidate: string;
  action: "add" | "merge" | "discard";
  skill_id: string | null;
  version: string | null;
  reason: string;
}

export interface EvolutionReport {
  user: string;
  entries: EvolutionEntry[];
  error: string | null;
}

export interface Trace {
  trace_id: number;
  user: string;
  query: string;
  search_query: string;
  rewrite_fallback: boolean;
  scored: ScoredRow[];
  injected_ids: string[];
  injected_count: number;
  context: string;
  latencies_ms: Record<string, number>;
  created_at: number;
  evolution: EvolutionReport | null;
}

export interface ProxyConfig {
  bank_root: string;
  weights: { lambda: number; alpha: number; eta: number; k: number; m: number };
  bm25: { k1: number; b: number };
  default_user: string;
  [key: string]: unknown;
}

export interface ApiError {
  status: number;
  message: string;
}

export type Result<T> = { ok: true; value: T } | { ok: false; error: ApiError };
