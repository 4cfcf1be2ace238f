/**
 * Batch image conversion: decode source images (PNG), convert to 8-bit
 * grayscale with the fixed luma weights, write binary PGM, and rewrite
 * the manifest to point at the converted files.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { PNG } from "pngjs";

import { encodePgm } from "./pgm";

/** 0.299 R + 0.587 G + 0.114 B, rounded half-up. */
export function rgbToLuma(r: number, g: number, b: number): number {
  return Math.round(0.299 * r + 0.587 * g + 0.114 * b);
}

export function pngToGray(data: Buffer): { width: number; height: number; gray: Uint8Array } {
  const png = PNG.sync.read(data); // normalizes to 8-bit RGBA
  const gray = new Uint8Array(png.width * png.height);
  for (let i = 0; i < gray.length; i++) {
    gray[i] = rgbToLuma(png.data[4 * i], png.data[4 * i + 1], png.data[4 * i + 2]);
  }
  return { width: png.width, height: png.height, gray };
}

export interface ConvertResult {
  converted: number;
  skipped: string[];
  manifestPath: string;
}

/**
 * Convert every image referenced by the manifest into ``outDir`` and write
 * a rewritten manifest next to them. Undecodable images are skipped with a
 * log line and their rows dropped.
 */
export function convertImages(manifestPath: string, outDir: string): ConvertResult {
  const text = fs.readFileSync(manifestPath, "utf-8");
  const lines = text.split("\n").filter((l) => l.length > 0);
  const header = "path,gender,face_score,second_face_score";
  if (lines[0] !== header) {
    throw new Error(`manifest must start with "${header}"`);
  }
  fs.mkdirSync(outDir, { recursive: true });
  const root = path.dirname(manifestPath);
  const outLines = [header];
  const skipped: string[] = [];
  for (const line of lines.slice(1)) {
    const fields = line.split(",");
    if (fields.length !== 4) {
      throw new Error(`malformed manifest row: ${line}`);
    }
    const src = path.isAbsolute(fields[0]) ? fields[0] : path.join(root, fields[0]);
    let img;
    try {
      img = pngToGray(fs.readFileSync(src));
    } catch (err) {
      console.error(`skipping ${fields[0]}: ${(err as Error).message}`);
      skipped.push(fields[0]);
      continue;
    }
    const rel = fields[0].replace(/\.[^./\\]+$/, "") + ".pgm";
    const dest = path.join(outDir, rel);
    fs.mkdirSync(path.dirname(dest), { recursive: true });
    fs.writeFileSync(dest, encodePgm(img.gray, img.width, img.height));
    outLines.push([rel, fields[1], fields[2], fields[3]].join(","));
  }
  const outManifest = path.join(outDir, "manifest.csv");
  fs.writeFileSync(outManifest, outLines.join("\n") + "\n");
  return { converted: outLines.length - 1, skipped, manifestPath: outManifest };
}
