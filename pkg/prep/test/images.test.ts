import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { PNG } from "pngjs";

import { convertImages, pngToGray, rgbToLuma } from "../src/images";
import { decodePgm } from "../src/pgm";

function makePng(width: number, height: number,
                 fill: (i: number) => [number, number, number]): Buffer {
  const png = new PNG({ width, height });
  for (let i = 0; i < width * height; i++) {
    const [r, g, b] = fill(i);
    png.data[4 * i] = r;
    png.data[4 * i + 1] = g;
    png.data[4 * i + 2] = b;
    png.data[4 * i + 3] = 255;
  }
  return PNG.sync.write(png);
}

function tmpDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "prep-img-"));
}

test("luma weights and rounding", () => {
  assert.equal(rgbToLuma(255, 255, 255), 255);
  assert.equal(rgbToLuma(0, 0, 0), 0);
  assert.equal(rgbToLuma(255, 0, 0), 76);   // round(76.245)
  assert.equal(rgbToLuma(0, 255, 0), 150);  // round(149.685)
  assert.equal(rgbToLuma(0, 0, 255), 29);   // round(29.07)
});

test("white png becomes a pgm of 255s", () => {
  const dir = tmpDir();
  fs.writeFileSync(path.join(dir, "white.png"),
    makePng(6, 4, () => [255, 255, 255]));
  fs.writeFileSync(path.join(dir, "manifest.csv"),
    "path,gender,face_score,second_face_score\nwhite.png,1,5,\n");
  const out = path.join(dir, "out");
  const result = convertImages(path.join(dir, "manifest.csv"), out);
  assert.equal(result.converted, 1);
  const pgm = decodePgm(fs.readFileSync(path.join(out, "white.pgm")));
  assert.equal(pgm.width, 6);
  assert.equal(pgm.height, 4);
  assert.ok(Array.from(pgm.gray).every((v) => v === 255));
});

test("pure red maps to gray 76", () => {
  const gray = pngToGray(makePng(2, 2, () => [255, 0, 0]));
  assert.deepEqual(Array.from(gray.gray), [76, 76, 76, 76]);
});

test("undecodable images are skipped and their rows dropped", () => {
  const dir = tmpDir();
  fs.writeFileSync(path.join(dir, "good.png"), makePng(2, 2, () => [9, 9, 9]));
  fs.writeFileSync(path.join(dir, "bad.png"), Buffer.from("not a png"));
  fs.writeFileSync(path.join(dir, "manifest.csv"),
    "path,gender,face_score,second_face_score\n"
    + "good.png,0,4,\nbad.png,1,6,\n");
  const out = path.join(dir, "out");
  const result = convertImages(path.join(dir, "manifest.csv"), out);
  assert.equal(result.converted, 1);
  assert.deepEqual(result.skipped, ["bad.png"]);
  const manifest = fs.readFileSync(result.manifestPath, "utf-8").trim().split("\n");
  assert.deepEqual(manifest, ["path,gender,face_score,second_face_score",
                              "good.pgm,0,4,"]);
});

test("grayscale png stays identical through the luma map", () => {
  // for r = g = b the luma weights sum to 1, so values pass through
  const gray = pngToGray(makePng(3, 1, (i) => [17 * i, 17 * i, 17 * i]));
  assert.deepEqual(Array.from(gray.gray), [0, 17, 34]);
});
