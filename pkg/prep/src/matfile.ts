/**
 * Minimal MAT-file (level 5) reader covering the metadata layout the IMDB
 * dataset ships: little-endian files holding numeric arrays, char arrays,
 * cell arrays, and (nested) structs. Compressed elements are inflated with
 * node's zlib. Anything outside that subset aborts with the offending
 * element named.
 */

import * as zlib from "node:zlib";

export type MatValue =
  | { kind: "numeric"; dims: number[]; data: Float64Array }
  | { kind: "char"; dims: number[]; text: string }
  | { kind: "cell"; dims: number[]; items: MatValue[] }
  | { kind: "struct"; dims: number[]; fields: Map<string, MatValue[]> };

const MI_INT8 = 1;
const MI_UINT8 = 2;
const MI_INT16 = 3;
const MI_UINT16 = 4;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_SINGLE = 7;
const MI_DOUBLE = 9;
const MI_INT64 = 12;
const MI_UINT64 = 13;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;
const MI_UTF8 = 16;

const MX_CELL = 1;
const MX_STRUCT = 2;
const MX_CHAR = 4;
const MX_DOUBLE = 6;
const MX_SINGLE = 7;
const MX_NUMERIC_MIN = 6;
const MX_NUMERIC_MAX = 13;

interface Element {
  type: number;
  data: Buffer;
  next: number;
}

function readElement(buf: Buffer, pos: number): Element {
  const first = buf.readUInt32LE(pos);
  if (first >>> 16 !== 0) {
    // small data element: type and byte count packed into one word
    const type = first & 0xffff;
    const bytes = first >>> 16;
    return { type, data: buf.subarray(pos + 4, pos + 4 + bytes), next: pos + 8 };
  }
  const bytes = buf.readUInt32LE(pos + 4);
  const start = pos + 8;
  const padded = Math.ceil(bytes / 8) * 8;
  return { type: first, data: buf.subarray(start, start + bytes), next: start + padded };
}

function numericData(type: number, data: Buffer): Float64Array {
  const readers: Record<number, [number, (o: number) => number]> = {
    [MI_INT8]: [1, (o) => data.readInt8(o)],
    [MI_UINT8]: [1, (o) => data.readUInt8(o)],
    [MI_INT16]: [2, (o) => data.readInt16LE(o)],
    [MI_UINT16]: [2, (o) => data.readUInt16LE(o)],
    [MI_INT32]: [4, (o) => data.readInt32LE(o)],
    [MI_UINT32]: [4, (o) => data.readUInt32LE(o)],
    [MI_SINGLE]: [4, (o) => data.readFloatLE(o)],
    [MI_DOUBLE]: [8, (o) => data.readDoubleLE(o)],
    [MI_INT64]: [8, (o) => Number(data.readBigInt64LE(o))],
    [MI_UINT64]: [8, (o) => Number(data.readBigUInt64LE(o))],
  };
  const reader = readers[type];
  if (!reader) {
    throw new Error(`unsupported numeric MAT element type ${type}`);
  }
  const [size, read] = reader;
  const out = new Float64Array(data.length / size);
  for (let i = 0; i < out.length; i++) {
    out[i] = read(i * size);
  }
  return out;
}

function charText(type: number, data: Buffer): string {
  if (type === MI_UINT16) {
    let s = "";
    for (let i = 0; i + 1 < data.length; i += 2) {
      s += String.fromCharCode(data.readUInt16LE(i));
    }
    return s;
  }
  if (type === MI_UINT8 || type === MI_INT8 || type === MI_UTF8) {
    return data.toString("utf-8");
  }
  throw new Error(`unsupported char MAT element type ${type}`);
}

function parseMatrix(data: Buffer): { name: string; value: MatValue } {
  let pos = 0;
  const flagsEl = readElement(data, pos);
  if (flagsEl.type !== MI_UINT32 || flagsEl.data.length < 8) {
    throw new Error("malformed MAT array flags");
  }
  const cls = flagsEl.data.readUInt32LE(0) & 0xff;
  const complex = (flagsEl.data.readUInt32LE(0) >>> 8) & 0x08;
  pos = flagsEl.next;

  const dimsEl = readElement(data, pos);
  const dims = Array.from(numericData(dimsEl.type, dimsEl.data), Number);
  pos = dimsEl.next;

  const nameEl = readElement(data, pos);
  const name = nameEl.data.toString("ascii");
  pos = nameEl.next;

  const count = dims.reduce((a, b) => a * b, 1);

  if (cls >= MX_NUMERIC_MIN && cls <= MX_NUMERIC_MAX) {
    if (complex) {
      throw new Error(`complex array ${name || "(unnamed)"} not supported`);
    }
    const real = readElement(data, pos);
    return { name, value: { kind: "numeric", dims, data: numericData(real.type, real.data) } };
  }
  if (cls === MX_CHAR) {
    const text = readElement(data, pos);
    return { name, value: { kind: "char", dims, text: charText(text.type, text.data) } };
  }
  if (cls === MX_CELL) {
    const items: MatValue[] = [];
    for (let i = 0; i < count; i++) {
      const el = readElement(data, pos);
      if (el.type !== MI_MATRIX) {
        throw new Error(`cell item has unexpected element type ${el.type}`);
      }
      items.push(parseMatrix(el.data).value);
      pos = el.next;
    }
    return { name, value: { kind: "cell", dims, items } };
  }
  if (cls === MX_STRUCT) {
    const lenEl = readElement(data, pos);
    const fieldLen = Number(numericData(lenEl.type, lenEl.data)[0]);
    pos = lenEl.next;
    const namesEl = readElement(data, pos);
    pos = namesEl.next;
    const fieldNames: string[] = [];
    for (let off = 0; off < namesEl.data.length; off += fieldLen) {
      const raw = namesEl.data.subarray(off, off + fieldLen);
      const end = raw.indexOf(0);
      fieldNames.push(raw.subarray(0, end < 0 ? raw.length : end).toString("ascii"));
    }
    const fields = new Map<string, MatValue[]>(fieldNames.map((f) => [f, []]));
    for (let e = 0; e < count; e++) {
      for (const f of fieldNames) {
        const el = readElement(data, pos);
        if (el.type !== MI_MATRIX) {
          throw new Error(`struct field ${f} has unexpected element type ${el.type}`);
        }
        fields.get(f)!.push(parseMatrix(el.data).value);
        pos = el.next;
      }
    }
    return { name, value: { kind: "struct", dims, fields } };
  }
  throw new Error(`unsupported MAT array class ${cls} for ${name || "(unnamed)"}`);
}

/** Parse a level-5 MAT file into a map of top-level variable names. */
export function readMat(buf: Buffer): Map<string, MatValue> {
  if (buf.length < 128) {
    throw new Error("file too short to be a MAT-file");
  }
  const endian = buf.toString("ascii", 126, 128);
  if (endian !== "IM") {
    throw new Error(`unsupported byte order marker ${JSON.stringify(endian)} (big-endian?)`);
  }
  const version = buf.readUInt16LE(124);
  if (version !== 0x0100) {
    throw new Error(`unsupported MAT version 0x${version.toString(16)}`);
  }
  const out = new Map<string, MatValue>();
  let pos = 128;
  while (pos < buf.length) {
    const el = readElement(buf, pos);
    if (el.type === MI_COMPRESSED) {
      const inner = zlib.inflateSync(el.data);
      const m = readElement(inner, 0);
      if (m.type !== MI_MATRIX) {
        throw new Error(`compressed element holds type ${m.type}, expected a matrix`);
      }
      const { name, value } = parseMatrix(m.data);
      out.set(name, value);
    } else if (el.type === MI_MATRIX) {
      const { name, value } = parseMatrix(el.data);
      out.set(name, value);
    } else {
      throw new Error(`unsupported top-level MAT element type ${el.type}`);
    }
    pos = el.next;
  }
  return out;
}
