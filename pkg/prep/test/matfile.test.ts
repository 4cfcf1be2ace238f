import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as path from "node:path";
import { test } from "node:test";

import { readMat } from "../src/matfile";

const FIXTURES = path.resolve(__dirname, "../../fixtures");

test("reads the scipy-written metadata struct", () => {
  const mat = readMat(fs.readFileSync(path.join(FIXTURES, "imdb_meta.mat")));
  const imdb = mat.get("imdb");
  assert.ok(imdb && imdb.kind === "struct");
  assert.deepEqual([...imdb.fields.keys()],
    ["full_path", "gender", "face_score", "second_face_score"]);

  const paths = imdb.fields.get("full_path")![0];
  assert.ok(paths.kind === "cell");
  assert.equal(paths.items.length, 5);
  assert.ok(paths.items[0].kind === "char");
  assert.equal(paths.items[0].text, "01/nm01_rm1_1968-2008.png");

  const gender = imdb.fields.get("gender")![0];
  assert.ok(gender.kind === "numeric");
  assert.deepEqual(Array.from(gender.data), [1, 0, 1, 1, 0]);

  const score = imdb.fields.get("face_score")![0];
  assert.ok(score.kind === "numeric");
  assert.deepEqual(Array.from(score.data), [4.5, 2.25, -Infinity, 3, 5.125]);

  const second = imdb.fields.get("second_face_score")![0];
  assert.ok(second.kind === "numeric");
  assert.ok(Number.isNaN(second.data[0]));
  assert.equal(second.data[3], 1.5);
});

test("rejects non-MAT input", () => {
  assert.throws(() => readMat(Buffer.alloc(64)), /too short/);
  const junk = Buffer.alloc(200);
  junk.write("XX", 126, "ascii");
  assert.throws(() => readMat(junk), /byte order/);
});
