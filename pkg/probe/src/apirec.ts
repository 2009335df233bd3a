import { createHash } from "node:crypto";
import { readFile } from "node:fs/promises";
import path from "node:path";

import type { AgreementReport, ProbeResult, ReleaseRecord } from "./types.js";

const SUPPORTED_FORMAT = 1;

/**
 * Parse one `.apirec` release record from the bank store.
 *
 * Format: line-delimited JSON; the first line is a header with
 * `format_version` and a sha256 over the payload lines, followed by one
 * object per record (`{"t": "api"}` / `{"t": "alias"}` / `{"t": "note"}`).
 */
export function parseApiRecord(text: string): ReleaseRecord {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error("empty release record");
  }
  const header = JSON.parse(lines[0]) as {
    format_version?: number;
    kind?: string;
    library?: string;
    version?: string;
    payload_sha256?: string;
  };
  if (header.format_version !== SUPPORTED_FORMAT) {
    throw new Error(
      `unsupported store format ${header.format_version} (supported: ${SUPPORTED_FORMAT})`,
    );
  }
  if (header.kind !== "release" || !header.library || !header.version) {
    throw new Error("not a release record");
  }
  const digest = createHash("sha256");
  for (const line of lines.slice(1)) {
    digest.update(line);
    digest.update("\n");
  }
  if (digest.digest("hex") !== header.payload_sha256) {
    throw new Error("release record checksum mismatch");
  }

  const record: ReleaseRecord = {
    library: header.library,
    version: header.version,
    canonicalNames: new Set(),
    aliases: new Map(),
    notes: [],
  };
  for (const line of lines.slice(1)) {
    const entry = JSON.parse(line) as {
      t: string;
      fqn?: string;
      alias?: string;
      canonical?: string;
      text?: string;
    };
    if (entry.t === "api" && entry.fqn) {
      record.canonicalNames.add(entry.fqn);
    } else if (entry.t === "alias" && entry.alias && entry.canonical) {
      record.aliases.set(entry.alias, entry.canonical);
    } else if (entry.t === "note" && entry.text) {
      record.notes.push(entry.text);
    }
  }
  return record;
}

export async function readApiRecordFile(filePath: string): Promise<ReleaseRecord> {
  return parseApiRecord(await readFile(filePath, "utf-8"));
}

/** Path of one release record inside a bank directory. */
export function releaseRecordPath(
  bankDir: string,
  library: string,
  version: string,
): string {
  const normalized = library.toLowerCase().replace(/[-_.]+/g, "-");
  return path.join(bankDir, "releases", normalized, `${version}.apirec`);
}

/** Every queryable name of a release: canonical spellings plus aliases. */
export function allNames(record: ReleaseRecord): string[] {
  return [...record.canonicalNames, ...record.aliases.keys()].sort();
}

/** Summarize a probe run against the static record it was derived from. */
export function agreement(result: ProbeResult): AgreementReport {
  const failures = result.results.filter((entry) => !entry.importable);
  const importable = result.results.length - failures.length;
  return {
    total: result.results.length,
    importable,
    failures,
    agreementRatio: result.results.length === 0 ? 1 : importable / result.results.length,
  };
}
