export { readTraceSessions, scoreLine, writeScores } from "./jsonl.js";
export { HttpLpips, LpipsScorer } from "./lpips.js";
export { scoreTrace, referenceCandidates, ScoreTraceOptions } from "./scoreTrace.js";
export { generationSeed } from "./seed.js";
export { HttpTxt2Img, Txt2ImgBackend, GenerationRequest } from "./txt2img.js";
export {
  BackendUnavailableError,
  MissingReferenceError,
  ScoreRecord,
  ScoreRecordSchema,
  TraceLineSchema,
  TraceSession,
} from "./types.js";
