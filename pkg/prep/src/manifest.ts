/**
 * IMDB metadata (.mat) to the engine's gender manifest CSV.
 *
 * Records with a missing gender are omitted. All face scores pass through
 * untouched (filtering by score is the engine loader's job). NaN second
 * face scores become the empty field the engine reads as "absent".
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { MatValue, readMat } from "./matfile";

export interface ImdbRecord {
  fullPath: string;
  gender: number | null;
  faceScore: number;
  secondFaceScore: number | null;
}

const REQUIRED = ["full_path", "gender", "face_score", "second_face_score"];

function asStrings(value: MatValue, what: string): string[] {
  if (value.kind === "cell") {
    return value.items.map((item, i) => {
      if (item.kind !== "char") {
        throw new Error(`${what}[${i}] is not a char array`);
      }
      return item.text;
    });
  }
  if (value.kind === "char") {
    return [value.text];
  }
  throw new Error(`${what} is neither a cell of strings nor a char array`);
}

function asNumbers(value: MatValue, what: string): Float64Array {
  if (value.kind !== "numeric") {
    throw new Error(`${what} is not a numeric array`);
  }
  return value.data;
}

/** Pull the per-image records out of a parsed metadata file. */
export function extractRecords(mat: Map<string, MatValue>): ImdbRecord[] {
  let root: Map<string, MatValue[]> | null = null;
  for (const value of mat.values()) {
    if (value.kind === "struct") {
      root = value.fields;
      break;
    }
  }
  if (!root) {
    throw new Error("no metadata struct found in the MAT file");
  }
  for (const field of REQUIRED) {
    if (!root.has(field) || root.get(field)!.length === 0) {
      throw new Error(`metadata is missing the ${field} attribute`);
    }
  }
  const paths = asStrings(root.get("full_path")![0], "full_path");
  const gender = asNumbers(root.get("gender")![0], "gender");
  const score = asNumbers(root.get("face_score")![0], "face_score");
  const second = asNumbers(root.get("second_face_score")![0], "second_face_score");
  const n = paths.length;
  for (const [name, arr] of [["gender", gender], ["face_score", score],
                             ["second_face_score", second]] as const) {
    if (arr.length !== n) {
      throw new Error(`${name} has ${arr.length} entries, expected ${n}`);
    }
  }
  const records: ImdbRecord[] = [];
  for (let i = 0; i < n; i++) {
    records.push({
      fullPath: paths[i],
      gender: Number.isNaN(gender[i]) ? null : gender[i],
      faceScore: score[i],
      secondFaceScore: Number.isNaN(second[i]) ? null : second[i],
    });
  }
  return records;
}

function formatNumber(v: number): string {
  return v.toString(); // shortest round-trip decimal
}

export function manifestCsv(records: ImdbRecord[], imagesRoot: string): string {
  const lines = ["path,gender,face_score,second_face_score"];
  for (const r of records) {
    if (r.gender === null) {
      continue;
    }
    const p = imagesRoot ? path.posix.join(imagesRoot, r.fullPath) : r.fullPath;
    const second = r.secondFaceScore === null ? "" : formatNumber(r.secondFaceScore);
    lines.push(`${p},${formatNumber(r.gender)},${formatNumber(r.faceScore)},${second}`);
  }
  return lines.join("\n") + "\n";
}

export function matToManifest(matPath: string, imagesRoot: string, outCsv: string): number {
  const records = extractRecords(readMat(fs.readFileSync(matPath)));
  const csv = manifestCsv(records, imagesRoot);
  fs.writeFileSync(outCsv, csv);
  return csv.split("\n").length - 2; // data rows written
}
