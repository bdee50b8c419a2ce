#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { HttpLpips } from "./lpips.js";
import { scoreTrace } from "./scoreTrace.js";
import { HttpTxt2Img } from "./txt2img.js";
import { BackendUnavailableError, MissingReferenceError } from "./types.js";

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .scriptName("perceptual-eval")
    .usage("$0 --trace traces.jsonl --references refs/ --out scores.jsonl")
    .option("trace", { type: "string", demandOption: true, describe: "trace JSONL from the simulator" })
    .option("references", { type: "string", demandOption: true, describe: "directory of reference PNGs" })
    .option("out", { type: "string", demandOption: true, describe: "scores JSONL to write" })
    .option("txt2img-url", { type: "string", demandOption: true, describe: "sd-webui style endpoint base URL" })
    .option("lpips-url", { type: "string", demandOption: true, describe: "LPIPS scoring endpoint base URL" })
    .option("model", { type: "string", default: "stable-diffusion-v1-5", describe: "generator id recorded for provenance" })
    .option("backbone", { type: "string", default: "alexnet", describe: "LPIPS backbone recorded for provenance" })
    .option("steps", { type: "number", default: 50, describe: "denoising steps per image" })
    .option("seed", { type: "number", default: 0, describe: "base seed for per-step generation seeds" })
    .option("size", { type: "number", default: 256, describe: "generated image width/height" })
    .strict()
    .help()
    .parse();

  try {
    const count = await scoreTrace({
      traceFile: argv.trace,
      referencesDir: argv.references,
      outFile: argv.out,
      backend: new HttpTxt2Img(argv["txt2img-url"], argv.model),
      scorer: new HttpLpips(argv["lpips-url"], argv.backbone),
      stepsPerImage: argv.steps,
      seed: argv.seed,
      imageSize: argv.size,
    });
    console.log(`wrote ${count} score records to ${argv.out}`);
    return 0;
  } catch (err) {
    if (err instanceof BackendUnavailableError || err instanceof MissingReferenceError) {
      console.error(err.message);
      return 1;
    }
    throw err;
  }
}

main().then((code) => process.exit(code));
