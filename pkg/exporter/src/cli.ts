#!/usr/bin/env node
/**
 * zzeb-export: encode a chunk JSONL file into a ZZEB embedding file.
 *
 *   zzeb-export --chunks data/chatgpt/train.jsonl --out train.zzeb
 *   zzeb-export --chunks fixture.jsonl --out t.zzeb --encoder hash
 *
 * Exit codes: 0 success, 1 usage error, 2 data/encoder error.
 */

import { makeEncoder } from "./encoder.js";
import { exportEmbeddings } from "./export.js";

interface Args {
  chunks: string;
  out: string;
  encoder: string;
  batchSize: number;
  modelHandle?: string;
  hashSeed: number;
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> & Omit<Args, "chunks" | "out"> = {
    encoder: "use",
    batchSize: 64,
    hashSeed: 0,
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new UsageError(`${flag} needs a value`);
      return argv[i];
    };
    switch (flag) {
      case "--chunks":
        args.chunks = next();
        break;
      case "--out":
        args.out = next();
        break;
      case "--encoder":
        args.encoder = next();
        break;
      case "--batch-size":
        args.batchSize = Number(next());
        break;
      case "--model-handle":
        args.modelHandle = next();
        break;
      case "--hash-seed":
        args.hashSeed = Number(next());
        break;
      case "--help":
      case "-h":
        console.log(
          "usage: zzeb-export --chunks <file.jsonl> --out <file.zzeb> " +
            "[--encoder use|hash] [--batch-size 64] [--model-handle url] [--hash-seed 0]",
        );
        process.exit(0);
        break;
      default:
        throw new UsageError(`unknown flag ${flag}`);
    }
  }
  const { chunks, out } = args;
  if (!chunks || !out) {
    throw new UsageError("--chunks and --out are required");
  }
  if (!Number.isInteger(args.batchSize) || args.batchSize < 1) {
    throw new UsageError(`--batch-size must be a positive integer`);
  }
  return { ...args, chunks, out };
}

class UsageError extends Error {}

async function main(): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 1;
  }
  try {
    const encoder = makeEncoder(args.encoder, {
      modelHandle: args.modelHandle,
      hashSeed: args.hashSeed,
    });
    const summary = await exportEmbeddings({
      chunkFile: args.chunks,
      output: args.out,
      batchSize: args.batchSize,
      encoder,
    });
    console.log(JSON.stringify(summary));
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

main().then((code) => {
  process.exitCode = code;
});
