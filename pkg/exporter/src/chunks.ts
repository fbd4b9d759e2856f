/** Chunk-file input: UTF-8 JSONL with {id, text, label, source_model}. */

import { readFileSync } from "node:fs";
import type { Label } from "./zzeb.js";

export interface Chunk {
  id: string;
  text: string;
  label: Label;
  sourceModel: string;
}

export function readChunkFile(path: string): Chunk[] {
  const chunks: Chunk[] = [];
  const lines = readFileSync(path, "utf-8").split("\n");
  lines.forEach((line, index) => {
    if (!line.trim()) return;
    let obj: Record<string, unknown>;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`${path}:${index + 1}: not valid JSON (${(err as Error).message})`);
    }
    const { id, text, label } = obj;
    if (typeof id !== "string" || id.length === 0) {
      throw new Error(`${path}:${index + 1}: missing or empty "id"`);
    }
    if (typeof text !== "string" || text.trim().length === 0) {
      throw new Error(`${path}:${index + 1}: missing or empty "text"`);
    }
    if (label !== "human" && label !== "ai" && label !== null && label !== undefined) {
      throw new Error(`${path}:${index + 1}: label must be "human", "ai", or null`);
    }
    chunks.push({
      id,
      text,
      label: label ?? null,
      sourceModel: typeof obj.source_model === "string" ? obj.source_model : "unknown",
    });
  });
  return chunks;
}
