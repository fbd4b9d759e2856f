/**
 * ZZEB binary embedding format, shared byte-for-byte with the Python side.
 *
 * Layout: magic "ZZEB", uint16 LE version, uint64 LE record count,
 * uint32 LE dimension (must be 512); then per record: uint16 LE id length,
 * UTF-8 id bytes, one label byte (0 human / 1 ai / 255 unlabeled),
 * 512 float32 LE values.
 */

export const ZZEB_MAGIC = "ZZEB";
export const ZZEB_VERSION = 1;
export const EMBED_DIM = 512;

export type Label = "human" | "ai" | null;

export interface EmbeddingRecord {
  chunkId: string;
  label: Label;
  vector: Float32Array;
}

const LABEL_TO_BYTE = new Map<Label, number>([
  ["human", 0],
  ["ai", 1],
  [null, 255],
]);

const BYTE_TO_LABEL = new Map<number, Label>([
  [0, "human"],
  [1, "ai"],
  [255, null],
]);

export function encodeRecords(records: EmbeddingRecord[]): Buffer {
  const chunks: Buffer[] = [];
  const header = Buffer.alloc(4 + 2 + 8 + 4);
  header.write(ZZEB_MAGIC, 0, "ascii");
  header.writeUInt16LE(ZZEB_VERSION, 4);
  header.writeBigUInt64LE(BigInt(records.length), 6);
  header.writeUInt32LE(EMBED_DIM, 14);
  chunks.push(header);

  for (const record of records) {
    if (record.vector.length !== EMBED_DIM) {
      throw new Error(
        `record ${record.chunkId}: vector has ${record.vector.length} values, expected ${EMBED_DIM}`,
      );
    }
    for (const v of record.vector) {
      if (!Number.isFinite(v)) {
        throw new Error(`record ${record.chunkId}: vector has non-finite values`);
      }
    }
    const idBytes = Buffer.from(record.chunkId, "utf-8");
    if (idBytes.length === 0 || idBytes.length > 0xffff) {
      throw new Error(`record id unserializable: ${record.chunkId.slice(0, 40)}`);
    }
    const head = Buffer.alloc(2);
    head.writeUInt16LE(idBytes.length, 0);
    const labelByte = LABEL_TO_BYTE.get(record.label);
    if (labelByte === undefined) {
      throw new Error(`record ${record.chunkId}: bad label ${record.label}`);
    }
    // Float32Array is platform-endian; serialize explicitly as LE
    const payload = Buffer.alloc(EMBED_DIM * 4);
    for (let i = 0; i < EMBED_DIM; i++) {
      payload.writeFloatLE(record.vector[i], i * 4);
    }
    chunks.push(head, idBytes, Buffer.from([labelByte]), payload);
  }
  return Buffer.concat(chunks);
}

export function decodeRecords(data: Buffer): EmbeddingRecord[] {
  if (data.length < 4 || data.toString("ascii", 0, 4) !== ZZEB_MAGIC) {
    throw new Error("not a ZZEB embedding file (bad magic)");
  }
  if (data.length < 18) {
    throw new Error("ZZEB header truncated");
  }
  const version = data.readUInt16LE(4);
  if (version !== ZZEB_VERSION) {
    throw new Error(`unsupported ZZEB version ${version}`);
  }
  const count = Number(data.readBigUInt64LE(6));
  const dim = data.readUInt32LE(14);
  if (dim !== EMBED_DIM) {
    throw new Error(`ZZEB dimension ${dim}, expected ${EMBED_DIM}`);
  }
  const records: EmbeddingRecord[] = [];
  let off = 18;
  for (let r = 0; r < count; r++) {
    if (off + 2 > data.length) throw new Error(`ZZEB truncated at record ${r}`);
    const idLen = data.readUInt16LE(off);
    off += 2;
    if (off + idLen + 1 + EMBED_DIM * 4 > data.length) {
      throw new Error(`ZZEB truncated at record ${r}`);
    }
    const chunkId = data.toString("utf-8", off, off + idLen);
    off += idLen;
    const label = BYTE_TO_LABEL.get(data[off]);
    if (label === undefined) throw new Error(`bad label byte ${data[off]} in record ${r}`);
    off += 1;
    const vector = new Float32Array(EMBED_DIM);
    for (let i = 0; i < EMBED_DIM; i++) {
      vector[i] = data.readFloatLE(off + i * 4);
    }
    off += EMBED_DIM * 4;
    records.push({ chunkId, label, vector });
  }
  if (off !== data.length) {
    throw new Error(`${data.length - off} trailing bytes after last ZZEB record`);
  }
  return records;
}
