import { describe, expect, it } from "vitest";
import { EMBED_DIM, decodeRecords, encodeRecords, type EmbeddingRecord } from "../src/zzeb.js";

function makeRecord(id: string, label: "human" | "ai" | null, fill = 0.5): EmbeddingRecord {
  const vector = new Float32Array(EMBED_DIM);
  for (let i = 0; i < EMBED_DIM; i++) vector[i] = fill * Math.sin(i + 1);
  return { chunkId: id, label, vector };
}

describe("zzeb format", () => {
  it("round-trips records bit-exactly", () => {
    const records = [makeRecord("a#0", "human"), makeRecord("b#1", "ai", -0.25), makeRecord("c#2", null, 1)];
    const decoded = decodeRecords(encodeRecords(records));
    expect(decoded).toHaveLength(3);
    decoded.forEach((got, i) => {
      expect(got.chunkId).toBe(records[i].chunkId);
      expect(got.label).toBe(records[i].label);
      expect(Buffer.from(got.vector.buffer)).toEqual(Buffer.from(records[i].vector.buffer));
    });
  });

  it("writes the exact header layout", () => {
    const data = encodeRecords([makeRecord("xy", "ai")]);
    expect(data.toString("ascii", 0, 4)).toBe("ZZEB");
    expect(data.readUInt16LE(4)).toBe(1); // version
    expect(Number(data.readBigUInt64LE(6))).toBe(1); // count
    expect(data.readUInt32LE(14)).toBe(512); // dimension
    expect(data.readUInt16LE(18)).toBe(2); // id length
    expect(data.toString("utf-8", 20, 22)).toBe("xy");
    expect(data[22]).toBe(1); // ai label byte
    expect(data.length).toBe(18 + 2 + 2 + 1 + 512 * 4);
  });

  it("encodes an empty list as a bare header", () => {
    const data = encodeRecords([]);
    expect(data.length).toBe(18);
    expect(decodeRecords(data)).toEqual([]);
  });

  it("rejects bad magic, version, and dimension", () => {
    const good = encodeRecords([makeRecord("a", "human")]);
    const badMagic = Buffer.from(good);
    badMagic.write("NOPE", 0, "ascii");
    expect(() => decodeRecords(badMagic)).toThrow(/magic/);

    const badVersion = Buffer.from(good);
    badVersion.writeUInt16LE(9, 4);
    expect(() => decodeRecords(badVersion)).toThrow(/version/);

    const badDim = Buffer.from(good);
    badDim.writeUInt32LE(256, 14);
    expect(() => decodeRecords(badDim)).toThrow(/dimension/);
  });

  it("rejects truncated and padded files", () => {
    const good = encodeRecords([makeRecord("a", "human")]);
    expect(() => decodeRecords(good.subarray(0, good.length - 10))).toThrow(/truncated/);
    expect(() => decodeRecords(Buffer.concat([good, Buffer.from("x")]))).toThrow(/trailing/);
  });

  it("rejects wrong-dimension vectors at write time", () => {
    const record = { chunkId: "a", label: null, vector: new Float32Array(100) };
    expect(() => encodeRecords([record])).toThrow(/512/);
  });
});
