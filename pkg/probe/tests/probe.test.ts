import { mkdtemp, readFile, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import path from "node:path";
import { execFileSync } from "node:child_process";
import { describe, expect, it } from "vitest";

import {
  ProbeError,
  agreement,
  parseApiRecord,
  probeImports,
  writeProbeRequest,
  writeProbeScript,
} from "../src/index.js";

const PYTHON = process.env.PYTHON ?? "python3";

describe("probe script generation", () => {
  it("writes a standalone script that compiles", async () => {
    const dir = await mkdtemp(path.join(tmpdir(), "probe-gen-"));
    const scriptPath = await writeProbeScript(dir);
    execFileSync(PYTHON, ["-m", "py_compile", scriptPath]);
    const source = await readFile(scriptPath, "utf-8");
    // stdlib-only: no import may reach outside the standard library
    const imports = [...source.matchAll(/^import (\w+)/gm)].map((m) => m[1]);
    expect(new Set(imports)).toEqual(new Set(["importlib", "json", "sys"]));
  });
});

describe("probing the host interpreter", () => {
  it("resolves existing attributes and reports missing ones", async () => {
    const result = await probeImports({
      interpreter: PYTHON,
      names: ["json.dumps", "os.path.join", "json.no_such_api"],
    });
    expect(result.results.map((r) => r.importable)).toEqual([true, true, false]);
    const failed = result.results[2];
    expect(failed.failedAt).toBe("no_such_api");
    expect(failed.reason).toContain("AttributeError");
  });

  it("preserves request order and count", async () => {
    const names = ["os.getcwd", "sys.path", "json.loads", "os.sep"];
    const result = await probeImports({ interpreter: PYTHON, names });
    expect(result.results.map((r) => r.name)).toEqual(names);
  });

  it("walks deep module prefixes before attribute traversal", async () => {
    const result = await probeImports({
      interpreter: PYTHON,
      names: ["xml.etree.ElementTree.fromstring", "logging.handlers.RotatingFileHandler"],
    });
    expect(result.results.every((r) => r.importable)).toBe(true);
  });

  it("reports a missing top-level module at its first segment", async () => {
    const result = await probeImports({
      interpreter: PYTHON,
      names: ["no_such_pkg_xyz.api"],
    });
    expect(result.results[0].importable).toBe(false);
    expect(result.results[0].failedAt).toBe("no_such_pkg_xyz");
    expect(result.results[0].reason).toContain("No module named");
  });

  it("records an interpreter fingerprint", async () => {
    const result = await probeImports({ interpreter: PYTHON, names: ["json.dumps"] });
    expect(result.interpreterFingerprint.python).toMatch(/^\d+\.\d+/);
    expect(Array.isArray(result.interpreterFingerprint.distributions)).toBe(true);
  });
});

describe("probe-level failures", () => {
  it("rejects names with fewer than two segments", async () => {
    await expect(
      probeImports({ interpreter: PYTHON, names: ["json"] }),
    ).rejects.toThrowError(ProbeError);
  });

  it("exits nonzero when the output path is unwritable", async () => {
    const dir = await mkdtemp(path.join(tmpdir(), "probe-unwritable-"));
    const scriptPath = await writeProbeScript(dir);
    const requestPath = await writeProbeRequest(dir, {
      names: ["json.dumps"],
      outputPath: path.join(dir, "missing-subdir", "out.json"),
    });
    let code = 0;
    let stderr = "";
    try {
      execFileSync(PYTHON, [scriptPath, requestPath], { stdio: "pipe" });
    } catch (error) {
      const failure = error as { status?: number; stderr?: Buffer };
      code = failure.status ?? -1;
      stderr = failure.stderr?.toString() ?? "";
    }
    expect(code).toBe(3);
    expect(stderr).toContain("output unwritable");
  });
});

describe("release record parsing", () => {
  const sha256 = async (lines: string[]) => {
    const { createHash } = await import("node:crypto");
    const digest = createHash("sha256");
    for (const line of lines) {
      digest.update(line);
      digest.update("\n");
    }
    return digest.digest("hex");
  };

  const makeRecord = async () => {
    const payload = [
      JSON.stringify({ t: "api", fqn: "toylib.core.alpha", kind: "function", pos: ["x"], kw: [], varargs: false, kwargs: false }),
      JSON.stringify({ t: "alias", alias: "toylib.alpha", canonical: "toylib.core.alpha" }),
      JSON.stringify({ t: "note", text: "parse_failures:0/2" }),
    ];
    const header = JSON.stringify({
      format_version: 1,
      kind: "release",
      library: "toylib",
      version: "1.0",
      payload_sha256: await sha256(payload),
    });
    return [header, ...payload].join("\n") + "\n";
  };

  it("reads names, aliases, and notes", async () => {
    const record = parseApiRecord(await makeRecord());
    expect(record.library).toBe("toylib");
    expect(record.canonicalNames.has("toylib.core.alpha")).toBe(true);
    expect(record.aliases.get("toylib.alpha")).toBe("toylib.core.alpha");
    expect(record.notes).toEqual(["parse_failures:0/2"]);
  });

  it("rejects checksum mismatches", async () => {
    const text = (await makeRecord()).replace("alpha", "omega");
    expect(() => parseApiRecord(text)).toThrowError(/checksum/);
  });

  it("rejects unsupported format versions", async () => {
    const text = (await makeRecord()).replace('"format_version":1', '"format_version":9');
    expect(() => parseApiRecord(text)).toThrowError(/unsupported store format/);
  });
});

describe("agreement summarizing", () => {
  it("computes the ratio over per-name outcomes", () => {
    const report = agreement({
      results: [
        { name: "a.b", importable: true },
        { name: "a.c", importable: false, failedAt: "c", reason: "AttributeError: c" },
      ],
      interpreterFingerprint: { python: "3.10.0", distributions: [] },
    });
    expect(report.total).toBe(2);
    expect(report.importable).toBe(1);
    expect(report.agreementRatio).toBeCloseTo(0.5);
    expect(report.failures[0].name).toBe("a.c");
  });
});
