/**
 * Deterministic per-step generation seed: FNV-1a over
 * "<base>/<session>/<t>", folded to a 31-bit value (diffusion backends
 * expect a non-negative int seed). Same trace + base seed reproduces every
 * generated image.
 */
export function generationSeed(baseSeed: number, sessionId: string, t: number): number {
  const key = `${baseSeed}/${sessionId}/${t}`;
  let hash = 0x811c9dc5;
  for (let i = 0; i < key.length; i++) {
    hash ^= key.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return (hash >>> 0) & 0x7fffffff;
}
