import { BackendUnavailableError } from "./types.js";
import { FetchLike } from "./txt2img.js";

/**
 * Perceptual distance between two images (base64 PNGs); lower is more
 * similar. `backbone` names the feature network for provenance.
 */
export interface LpipsScorer {
  readonly backbone: string;
  score(referencePng: string, candidatePng: string): Promise<number>;
}

/** Client for a small scoring service: POST /lpips {image_a, image_b}. */
export class HttpLpips implements LpipsScorer {
  readonly backbone: string;

  constructor(
    private readonly baseUrl: string,
    backbone: string = "alexnet",
    private readonly fetchFn: FetchLike = fetch,
  ) {
    this.backbone = backbone;
  }

  async score(referencePng: string, candidatePng: string): Promise<number> {
    const endpoint = `${this.baseUrl.replace(/\/$/, "")}/lpips`;
    let response: Response;
    try {
      response = await this.fetchFn(endpoint, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          image_a: referencePng,
          image_b: candidatePng,
          backbone: this.backbone,
        }),
      });
    } catch (err) {
      throw new BackendUnavailableError("LPIPS", endpoint, String(err));
    }
    if (!response.ok) {
      throw new BackendUnavailableError(
        "LPIPS",
        endpoint,
        `HTTP ${response.status} ${response.statusText}`,
      );
    }
    const payload = (await response.json()) as { lpips?: number };
    if (typeof payload.lpips !== "number" || !Number.isFinite(payload.lpips)) {
      throw new BackendUnavailableError("LPIPS", endpoint, "no numeric lpips in response");
    }
    return payload.lpips;
  }
}
