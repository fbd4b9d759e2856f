/**
 * Sentence encoders. The production path wraps the Universal Sentence Encoder
 * (tfjs); the hash encoder is a deterministic offline stand-in so the export
 * pipeline and the binary contract can be tested with no model download.
 */

import { EMBED_DIM } from "./zzeb.js";

export interface Encoder {
  readonly name: string;
  encode(texts: string[]): Promise<Float32Array[]>;
}

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export function fnv1a64(seed: bigint, text: string): bigint {
  let h = FNV_OFFSET;
  const mix = (byte: number) => {
    h ^= BigInt(byte);
    h = (h * FNV_PRIME) & MASK64;
  };
  for (let i = 0; i < 8; i++) {
    mix(Number((seed >> BigInt(8 * i)) & 0xffn));
  }
  for (const byte of Buffer.from(text, "utf-8")) {
    mix(byte);
  }
  return h;
}

function splitmix64(state: bigint): [bigint, bigint] {
  state = (state + 0x9e3779b97f4a7c15n) & MASK64;
  let z = state;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  z = z ^ (z >> 31n);
  return [z, state];
}

/** Deterministic unit-norm vector from a text hash; no model involved. */
export class HashEncoder implements Encoder {
  readonly name: string;
  private readonly seed: bigint;

  constructor(seed = 0) {
    this.seed = BigInt(seed);
    this.name = `hash(seed=${seed})`;
  }

  private vectorFor(text: string): Float32Array {
    let state = fnv1a64(this.seed, text);
    const uniform = () => {
      let value: bigint;
      [value, state] = splitmix64(state);
      return Number(value >> 11n) / 2 ** 53;
    };
    const out = new Float32Array(EMBED_DIM);
    // Box-Muller; u is kept away from 0 so log() stays finite
    for (let i = 0; i < EMBED_DIM; i += 2) {
      const u = Math.max(uniform(), 1e-300);
      const v = uniform();
      const radius = Math.sqrt(-2 * Math.log(u));
      out[i] = radius * Math.cos(2 * Math.PI * v);
      if (i + 1 < EMBED_DIM) out[i + 1] = radius * Math.sin(2 * Math.PI * v);
    }
    let norm = 0;
    for (const x of out) norm += x * x;
    norm = Math.sqrt(norm);
    for (let i = 0; i < EMBED_DIM; i++) out[i] /= norm;
    return out;
  }

  async encode(texts: string[]): Promise<Float32Array[]> {
    return texts.map((t) => this.vectorFor(t));
  }
}

/** Universal Sentence Encoder via @tensorflow-models; loaded lazily. */
interface EmbedTensor {
  data(): Promise<Float32Array | Uint8Array | Int32Array>;
  dispose(): void;
}

export class UseEncoder implements Encoder {
  readonly name: string;
  private readonly modelHandle?: string;
  private model: { embed(texts: string[]): Promise<EmbedTensor> } | null = null;

  constructor(modelHandle?: string) {
    this.modelHandle = modelHandle;
    this.name = `use(${modelHandle ?? "default"})`;
  }

  private async load() {
    if (this.model) return;
    let use;
    try {
      await import("@tensorflow/tfjs");
      use = await import("@tensorflow-models/universal-sentence-encoder");
    } catch (err) {
      throw new Error(
        `universal-sentence-encoder packages unavailable: ${(err as Error).message}`,
      );
    }
    try {
      this.model = await use.load(this.modelHandle ? { modelUrl: this.modelHandle } : undefined);
    } catch (err) {
      throw new Error(
        `failed to load the Universal Sentence Encoder (network or cache needed): ${(err as Error).message}`,
      );
    }
  }

  async encode(texts: string[]): Promise<Float32Array[]> {
    await this.load();
    const tensor = await this.model!.embed(texts);
    const flat = Float32Array.from(await tensor.data());
    tensor.dispose();
    if (flat.length !== texts.length * EMBED_DIM) {
      throw new Error(
        `encoder returned ${flat.length / texts.length} dims per text, expected ${EMBED_DIM}`,
      );
    }
    const out: Float32Array[] = [];
    for (let i = 0; i < texts.length; i++) {
      out.push(new Float32Array(flat.buffer, flat.byteOffset + i * EMBED_DIM * 4, EMBED_DIM).slice());
    }
    return out;
  }
}

export function makeEncoder(kind: string, options: { modelHandle?: string; hashSeed?: number }): Encoder {
  if (kind === "hash") return new HashEncoder(options.hashSeed ?? 0);
  if (kind === "use") return new UseEncoder(options.modelHandle);
  throw new Error(`unknown encoder ${kind}; expected "use" or "hash"`);
}
