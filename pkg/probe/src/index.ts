export { PROBE_SOURCE } from "./probeSource.js";
export {
  PROBE_FILENAME,
  ProbeError,
  probeImports,
  readProbeResult,
  writeProbeRequest,
  writeProbeScript,
} from "./runner.js";
export type { ProbeOptions } from "./runner.js";
export {
  agreement,
  allNames,
  parseApiRecord,
  readApiRecordFile,
  releaseRecordPath,
} from "./apirec.js";
export type {
  AgreementReport,
  InterpreterFingerprint,
  ProbeNameResult,
  ProbeRequest,
  ProbeResult,
  ReleaseRecord,
} from "./types.js";
