import { createReadStream } from "node:fs";
import { appendFile, writeFile } from "node:fs/promises";
import { createInterface } from "node:readline";

import { ScoreRecord, TraceLineSchema, TraceSession } from "./types.js";

/** Stream-parse a trace JSONL file into per-session step lists. */
export async function readTraceSessions(path: string): Promise<TraceSession[]> {
  const sessions = new Map<string, TraceSession>();
  const order: string[] = [];
  let lineNumber = 0;

  const rl = createInterface({
    input: createReadStream(path, { encoding: "utf-8" }),
    crlfDelay: Infinity,
  });

  for await (const raw of rl) {
    lineNumber++;
    const trimmed = raw.trim();
    if (!trimmed) continue;

    let parsed: unknown;
    try {
      parsed = JSON.parse(trimmed);
    } catch {
      throw new Error(`${path}:${lineNumber}: not valid JSON`);
    }
    const line = TraceLineSchema.parse(parsed);

    let session = sessions.get(line.session_id);
    if (!session) {
      session = {
        sessionId: line.session_id,
        imageId: line.meta?.image_id,
        captionIndex: line.meta?.caption_index,
        steps: [],
      };
      sessions.set(line.session_id, session);
      order.push(line.session_id);
    }
    session.steps.push({ t: line.t, prompt: line.accumulated_prompt });
  }

  for (const id of order) {
    sessions.get(id)!.steps.sort((a, b) => a.t - b.t);
  }
  return order.map((id) => sessions.get(id)!);
}

/** Serialize one score record as a stable-key JSON line. */
export function scoreLine(record: ScoreRecord): string {
  return JSON.stringify({
    session_id: record.session_id,
    t: record.t,
    lpips: record.lpips,
    generator_id: record.generator_id,
    lpips_backbone: record.lpips_backbone,
  });
}

export async function writeScores(path: string, records: ScoreRecord[]): Promise<void> {
  await writeFile(path, records.map((r) => scoreLine(r) + "\n").join(""), "utf-8");
}

/** Append-only variant used while a long scoring run is in flight. */
export async function appendScore(path: string, record: ScoreRecord): Promise<void> {
  await appendFile(path, scoreLine(record) + "\n", "utf-8");
}
