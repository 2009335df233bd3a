import { execFile } from "node:child_process";
import { mkdtemp, readFile, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import path from "node:path";
import { promisify } from "node:util";

import { PROBE_SOURCE } from "./probeSource.js";
import type { ProbeNameResult, ProbeRequest, ProbeResult } from "./types.js";

const execFileAsync = promisify(execFile);

export const PROBE_FILENAME = "probe.py";

/** Write the standalone probe program into `dir`; returns its path. */
export async function writeProbeScript(dir: string): Promise<string> {
  const scriptPath = path.join(dir, PROBE_FILENAME);
  await writeFile(scriptPath, PROBE_SOURCE, "utf-8");
  return scriptPath;
}

/** Write a request document the probe can consume. */
export async function writeProbeRequest(
  dir: string,
  request: ProbeRequest,
): Promise<string> {
  const requestPath = path.join(dir, "probe-request.json");
  await writeFile(
    requestPath,
    JSON.stringify({ names: request.names, output_path: request.outputPath }, null, 1),
    "utf-8",
  );
  return requestPath;
}

interface RawNameResult {
  name: string;
  importable: boolean;
  failed_at?: string;
  reason?: string;
}

export async function readProbeResult(outputPath: string): Promise<ProbeResult> {
  const raw = JSON.parse(await readFile(outputPath, "utf-8")) as {
    results: RawNameResult[];
    interpreter_fingerprint: { python: string; distributions: string[] };
  };
  const results: ProbeNameResult[] = raw.results.map((entry) => ({
    name: entry.name,
    importable: entry.importable,
    ...(entry.failed_at !== undefined ? { failedAt: entry.failed_at } : {}),
    ...(entry.reason !== undefined ? { reason: entry.reason } : {}),
  }));
  return {
    results,
    interpreterFingerprint: {
      python: raw.interpreter_fingerprint.python,
      distributions: raw.interpreter_fingerprint.distributions,
    },
  };
}

export class ProbeError extends Error {
  constructor(
    message: string,
    readonly exitCode: number | null,
    readonly stderr: string,
  ) {
    super(message);
    this.name = "ProbeError";
  }
}

export interface ProbeOptions {
  /** Interpreter of the environment under test (absolute path or name). */
  interpreter: string;
  /** Dotted names to probe; each needs at least two segments. */
  names: string[];
  /** Extra environment variables (e.g. PYTHONPATH of an isolated install). */
  env?: Record<string, string>;
  /** Kill the probe after this many milliseconds (default 120000). */
  timeoutMs?: number;
  /** Reuse a working directory instead of a fresh temp dir. */
  workDir?: string;
}

/**
 * Generate the probe, run it inside the target environment, and parse the
 * result.  Per-name failures are data in the result; only probe-level
 * problems (bad request, unwritable output, dead interpreter) throw.
 */
export async function probeImports(options: ProbeOptions): Promise<ProbeResult> {
  const workDir =
    options.workDir ?? (await mkdtemp(path.join(tmpdir(), "envsniff-probe-")));
  const scriptPath = await writeProbeScript(workDir);
  const outputPath = path.join(workDir, "probe-result.json");
  const requestPath = await writeProbeRequest(workDir, {
    names: options.names,
    outputPath,
  });

  try {
    await execFileAsync(options.interpreter, [scriptPath, requestPath], {
      timeout: options.timeoutMs ?? 120_000,
      // bytecode caches would be a write outside outputPath
      env: { ...process.env, PYTHONDONTWRITEBYTECODE: "1", ...options.env },
    });
  } catch (error) {
    const failure = error as { code?: number | null; stderr?: string; message?: string };
    throw new ProbeError(
      `probe run failed: ${failure.stderr || failure.message || "unknown error"}`,
      failure.code ?? null,
      failure.stderr ?? "",
    );
  }
  const result = await readProbeResult(outputPath);
  if (result.results.length !== options.names.length) {
    throw new ProbeError(
      `result count ${result.results.length} != request count ${options.names.length}`,
      0,
      "",
    );
  }
  result.results.forEach((entry, index) => {
    if (entry.name !== options.names[index]) {
      throw new ProbeError(`result order diverged at index ${index}`, 0, "");
    }
  });
  return result;
}
