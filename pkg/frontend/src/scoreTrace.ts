import { readFile } from "node:fs/promises";
import { existsSync } from "node:fs";
import { join } from "node:path";

import { readTraceSessions, writeScores } from "./jsonl.js";
import { LpipsScorer } from "./lpips.js";
import { generationSeed } from "./seed.js";
import { Txt2ImgBackend } from "./txt2img.js";
import { MissingReferenceError, ScoreRecord, TraceSession } from "./types.js";

export interface ScoreTraceOptions {
  traceFile: string;
  referencesDir: string;
  outFile: string;
  backend: Txt2ImgBackend;
  scorer: LpipsScorer;
  stepsPerImage?: number; // denoising steps; 50 unless asked otherwise
  seed?: number;
  imageSize?: number;
}

/** Reference lookup: image id, then caption index, then the session id. */
export function referenceCandidates(dir: string, session: TraceSession): string[] {
  const names: string[] = [];
  if (session.imageId) names.push(`${session.imageId}.png`);
  if (session.captionIndex !== undefined) names.push(`cap-${session.captionIndex}.png`);
  names.push(`${session.sessionId.replace(/[^A-Za-z0-9_.-]+/g, "_")}.png`);
  return names.map((n) => join(dir, n));
}

async function loadReference(dir: string, session: TraceSession): Promise<string> {
  const tried = referenceCandidates(dir, session);
  for (const path of tried) {
    if (existsSync(path)) {
      return (await readFile(path)).toString("base64");
    }
  }
  throw new MissingReferenceError(session.sessionId, tried);
}

/**
 * Generate one image per trace step from its accumulated prompt, score it
 * against the session's reference image, and write the scores JSONL the
 * simulator ingests. Returns the number of records written.
 */
export async function scoreTrace(options: ScoreTraceOptions): Promise<number> {
  const stepsPerImage = options.stepsPerImage ?? 50;
  const baseSeed = options.seed ?? 0;
  const size = options.imageSize ?? 256;

  const sessions = await readTraceSessions(options.traceFile);
  const records: ScoreRecord[] = [];
  for (const session of sessions) {
    const reference = await loadReference(options.referencesDir, session);
    for (const step of session.steps) {
      const generated = await options.backend.generate({
        prompt: step.prompt,
        seed: generationSeed(baseSeed, session.sessionId, step.t),
        steps: stepsPerImage,
        width: size,
        height: size,
      });
      const lpips = await options.scorer.score(reference, generated);
      records.push({
        session_id: session.sessionId,
        t: step.t,
        lpips,
        generator_id: options.backend.generatorId,
        lpips_backbone: options.scorer.backbone,
      });
    }
  }
  await writeScores(options.outFile, records);
  return records.length;
}
