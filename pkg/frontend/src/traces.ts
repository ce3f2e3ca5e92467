// Trace viewer formatting. Pure functions over admin-API payloads; every
// number shown comes verbatim from the trace, nothing is recomputed.

import type { EvolutionEntry, Trace } from "./types.js";

export interface ScoreTableRow {
  skillId: string;
  name: string;
  version: string;
  dense: string;
  lexical: string;
  rel: string;
  injected: boolean;
  belowEta: boolean;
}

function fixed(value: number): string {
  return value.toFixed(4);
}

/** Rows for the candidate table, with injected/below-threshold flags.
 * `eta` comes from /admin/config; rows keep the trace's rank order. */
export function scoreTable(trace: Trace, eta: number): ScoreTableRow[] {
  const injected = new Set(trace.injected_ids);
  return trace.scored.map((row) => ({
    skillId: row.skill_id,
    name: row.name,
    version: row.version,
    dense: fixed(row.dense_norm),
    lexical: fixed(row.lexical_norm),
    rel: fixed(row.rel),
    injected: injected.has(row.skill_id),
    belowEta: row.rel < eta,
  }));
}

/** "q̃ == q" turns are flagged as fallback per the serving contract. */
export function rewriteLabel(trace: Trace): string {
  if (trace.rewrite_fallback) return `${trace.search_query} (fallback)`;
  return trace.search_query;
}

export function evolutionLabel(entry: EvolutionEntry): string {
  if (entry.action === "merge") return `${entry.candidate}: merge → v${entry.version}`;
  if (entry.action === "add") return `${entry.candidate}: add → v${entry.version}`;
  return `${entry.candidate}: discard (${entry.reason || "no reason given"})`;
}

export function evolutionRows(trace: Trace): string[] {
  if (!trace.evolution) return [];
  return trace.evolution.entries.map(evolutionLabel);
}

export function injectionSummary(trace: Trace): string {
  const n = trace.injected_count;
  return n === 1 ? "1 skill injected" : `${n} skills injected`;
}

/** Trace ids are a bounded ring; a requested id that fell out is "evicted". */
export function findTrace(traces: Trace[], traceId: number): Trace | "evicted" {
  return traces.find((t) => t.trace_id === traceId) ?? "evicted";
}
