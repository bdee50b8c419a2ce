import { BackendUnavailableError } from "./types.js";

export interface GenerationRequest {
  prompt: string;
  seed: number;
  steps: number;
  width: number;
  height: number;
}

/** Produces one PNG (base64) per request; identifies itself for provenance. */
export interface Txt2ImgBackend {
  readonly generatorId: string;
  generate(request: GenerationRequest): Promise<string>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/**
 * Client for an sd-webui style HTTP API: POST /sdapi/v1/txt2img with
 * sampler settings, reads the first base64 image from the response.
 */
export class HttpTxt2Img implements Txt2ImgBackend {
  readonly generatorId: string;

  constructor(
    private readonly baseUrl: string,
    private readonly model: string = "sd-webui",
    private readonly fetchFn: FetchLike = fetch,
  ) {
    this.generatorId = model;
  }

  async generate(request: GenerationRequest): Promise<string> {
    const endpoint = `${this.baseUrl.replace(/\/$/, "")}/sdapi/v1/txt2img`;
    let response: Response;
    try {
      response = await this.fetchFn(endpoint, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          prompt: request.prompt,
          seed: request.seed,
          steps: request.steps,
          width: request.width,
          height: request.height,
          sampler_name: "Euler",
        }),
      });
    } catch (err) {
      throw new BackendUnavailableError("text-to-image", endpoint, String(err));
    }
    if (!response.ok) {
      throw new BackendUnavailableError(
        "text-to-image",
        endpoint,
        `HTTP ${response.status} ${response.statusText}`,
      );
    }
    const payload = (await response.json()) as { images?: string[] };
    if (!payload.images?.length) {
      throw new BackendUnavailableError("text-to-image", endpoint, "no image in response");
    }
    return payload.images[0];
  }
}
