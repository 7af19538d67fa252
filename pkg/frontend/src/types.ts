// Shapes the harness API serves. Field names match the JSON exactly.

export type AttackKind = "none" | "applet" | "mitm_js";

export type MitigationMode = "full" | "no_snippets" | "images" | "iframe" | "off";

export type LeakClass =
  | "none"
  | "frame_src_only"
  | "image_names"
  | "filenames"
  | "snippets";

export interface CorpusFile {
  path: string;
  body: string;
}

export interface ScenarioConfig {
  seed: number;
  attack: AttackKind;
  mitigation: MitigationMode;
  proxy_only: { address: string; port: number } | null;
  provider_secure: boolean;
  corpus: CorpusFile[];
  query_script: string[][];
  mitm_payload: Record<string, unknown>[] | null;
  applet_program: Record<string, unknown>[] | null;
}

/**
 * What POST /api/scenario accepts: any subset of the config; proxy_only
 * additionally takes true to mean the default LAN proxy endpoint.
 */
export type ScenarioPatch = Partial<Omit<ScenarioConfig, "proxy_only">> & {
  proxy_only?: { address: string; port: number } | boolean | null;
};

export interface ScenarioInfo {
  scenario_id: string;
  config: ScenarioConfig;
  rounds: number;
}

/** One submitted query round, as POST /api/attack/query returns it. */
export interface RoundEntry {
  scenario_id: string;
  attack: AttackKind;
  mitigation: string;
  terms: string[];
  /** [source path, snippet text] pairs shown on the victim page. */
  snippets: [string, string][];
  leak_class: LeakClass;
}

/** Transcript records share event + seq; the rest varies by kind. */
export interface TranscriptEvent {
  event: string;
  seq: number;
  [key: string]: unknown;
}

export interface TranscriptPage {
  events: TranscriptEvent[];
  digest: string;
}

export interface MatrixCell {
  attack: AttackKind;
  mitigation: string;
  leak_class: LeakClass;
  expected: LeakClass;
  ok: boolean;
  leaked_items: string[];
  transcript_digest: string;
}
