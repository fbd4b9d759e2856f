/** Batch export of chunk files into ZZEB embedding files. */

import { writeFileSync } from "node:fs";
import { readChunkFile } from "./chunks.js";
import type { Encoder } from "./encoder.js";
import { encodeRecords, type EmbeddingRecord } from "./zzeb.js";

export interface ExportJob {
  chunkFile: string;
  output: string;
  batchSize?: number;
  encoder: Encoder;
}

export interface ExportSummary {
  chunkCount: number;
  output: string;
  manifest: string;
  encoder: string;
}

export async function exportEmbeddings(job: ExportJob): Promise<ExportSummary> {
  const batchSize = job.batchSize ?? 64;
  if (batchSize < 1) {
    throw new Error(`batch size must be >= 1, got ${batchSize}`);
  }
  const chunks = readChunkFile(job.chunkFile);
  const records: EmbeddingRecord[] = [];
  for (let start = 0; start < chunks.length; start += batchSize) {
    const batch = chunks.slice(start, start + batchSize);
    const vectors = await job.encoder.encode(batch.map((c) => c.text));
    if (vectors.length !== batch.length) {
      throw new Error(`encoder returned ${vectors.length} vectors for ${batch.length} texts`);
    }
    batch.forEach((chunk, i) => {
      records.push({ chunkId: chunk.id, label: chunk.label, vector: vectors[i] });
    });
  }
  writeFileSync(job.output, encodeRecords(records));
  const manifestPath = `${job.output}.manifest.json`;
  const manifest = {
    source_chunk_file: job.chunkFile,
    output: job.output,
    encoder: job.encoder.name,
    chunk_count: records.length,
    batch_size: batchSize,
    dimension: 512,
  };
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return {
    chunkCount: records.length,
    output: job.output,
    manifest: manifestPath,
    encoder: job.encoder.name,
  };
}
