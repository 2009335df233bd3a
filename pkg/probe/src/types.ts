/** Request handed to the probe: names to try, and where to write the result. */
export interface ProbeRequest {
  /** Fully-qualified dotted names; each needs at least two segments. */
  names: string[];
  /** Path the probe writes its JSON result document to. */
  outputPath: string;
}

/** Per-name outcome, order-aligned with the request. */
export interface ProbeNameResult {
  name: string;
  importable: boolean;
  /** First segment that could not be imported or traversed. */
  failedAt?: string;
  /** First line of the exception that stopped the traversal. */
  reason?: string;
}

/** Identity of the interpreter and the releases visible to it. */
export interface InterpreterFingerprint {
  python: string;
  distributions: string[];
}

export interface ProbeResult {
  results: ProbeNameResult[];
  interpreterFingerprint: InterpreterFingerprint;
}

/** One release record from the bank store (a parsed .apirec file). */
export interface ReleaseRecord {
  library: string;
  version: string;
  /** Canonical fully-qualified names (defining-module spellings). */
  canonicalNames: Set<string>;
  /** Alias spelling -> canonical name. */
  aliases: Map<string, string>;
  notes: string[];
}

/** Disagreements between the static record and a live probe run. */
export interface AgreementReport {
  total: number;
  importable: number;
  failures: ProbeNameResult[];
  agreementRatio: number;
}
