import { z } from "zod";

/** One line of the simulator's trace JSONL (extra keys pass through). */
export const TraceLineSchema = z
  .object({
    session_id: z.string().min(1),
    t: z.number().int().positive(),
    accumulated_prompt: z.string(),
    meta: z
      .object({
        image_id: z.string().optional(),
        caption_index: z.number().int().optional(),
      })
      .passthrough()
      .optional(),
  })
  .passthrough();

export type TraceLine = z.infer<typeof TraceLineSchema>;

/** All steps of one transmission session, in step order. */
export interface TraceSession {
  sessionId: string;
  imageId?: string;
  captionIndex?: number;
  steps: Array<{ t: number; prompt: string }>;
}

/**
 * One emitted score line. `session_id`, `t` and `lpips` are what the
 * simulator's ingest step matches on; the rest is provenance.
 */
export const ScoreRecordSchema = z.object({
  session_id: z.string().min(1),
  t: z.number().int().positive(),
  lpips: z.number().nonnegative().finite(),
  generator_id: z.string().min(1),
  lpips_backbone: z.string().min(1),
});

export type ScoreRecord = z.infer<typeof ScoreRecordSchema>;

export class BackendUnavailableError extends Error {
  constructor(kind: string, endpoint: string, cause: string) {
    super(
      `${kind} backend unavailable at ${endpoint}: ${cause}. ` +
        `Scoring needs a running text-to-image HTTP service (sd-webui style ` +
        `/sdapi/v1/txt2img) and an LPIPS scoring service (POST /lpips).`,
    );
    this.name = "BackendUnavailableError";
  }
}

export class MissingReferenceError extends Error {
  constructor(sessionId: string, tried: string[]) {
    super(
      `no reference image for session ${sessionId}; looked for: ${tried.join(", ")}`,
    );
    this.name = "MissingReferenceError";
  }
}
