#!/usr/bin/env node
/**
 * emogen-prep: one-shot dataset preparation for the emogen engine.
 *
 *   emogen-prep mat2manifest   --mat meta.mat --images imgs --out manifest.csv
 *   emogen-prep convert-images --manifest manifest.csv --out converted/
 *   emogen-prep cascade-convert --xml cascade.xml --out cascade.json
 */

import * as fs from "node:fs";
import { parseArgs } from "node:util";

import { cascadeJson, convertCascadeXml } from "./cascade";
import { convertImages } from "./images";
import { matToManifest } from "./manifest";

function usage(): never {
  console.error("usage: emogen-prep <mat2manifest|convert-images|cascade-convert> [flags]");
  process.exit(1);
}

function requireFlag(values: Record<string, unknown>, name: string): string {
  const v = values[name];
  if (typeof v !== "string" || v.length === 0) {
    console.error(`missing required flag --${name}`);
    process.exit(1);
  }
  return v;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "mat2manifest") {
      const { values } = parseArgs({
        args: rest,
        options: { mat: { type: "string" }, images: { type: "string" },
                   out: { type: "string" } },
      });
      const rows = matToManifest(requireFlag(values, "mat"),
                                 values.images ?? "", requireFlag(values, "out"));
      console.error(`wrote ${rows} manifest rows`);
      return 0;
    }
    if (command === "convert-images") {
      const { values } = parseArgs({
        args: rest,
        options: { manifest: { type: "string" }, out: { type: "string" } },
      });
      const result = convertImages(requireFlag(values, "manifest"),
                                   requireFlag(values, "out"));
      console.error(`converted ${result.converted} images `
        + `(${result.skipped.length} skipped) -> ${result.manifestPath}`);
      return 0;
    }
    if (command === "cascade-convert") {
      const { values } = parseArgs({
        args: rest,
        options: { xml: { type: "string" }, out: { type: "string" } },
      });
      const cascade = convertCascadeXml(fs.readFileSync(requireFlag(values, "xml"), "utf-8"));
      fs.writeFileSync(requireFlag(values, "out"), cascadeJson(cascade));
      const weak = cascade.stages.reduce((a, s) => a + s.weak.length, 0);
      console.error(`wrote ${cascade.stages.length} stages / ${weak} weak classifiers`);
      return 0;
    }
    usage();
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
