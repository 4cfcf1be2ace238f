/**
 * OpenCV face-cascade XML (old 1.x haar trees or the newer cascade
 * schema) to the engine's JSON cascade format. Rectangle lists, feature
 * and stage thresholds, and leaf values pass through verbatim; anything
 * the engine cannot represent (tilted features, trees deeper than
 * stumps, non-HAAR features) aborts with the offending element named.
 */

import { XMLParser } from "fast-xml-parser";

export interface EngineWeak {
  rects: number[][];
  threshold: number;
  left: number;
  right: number;
}

export interface EngineCascade {
  window_w: number;
  window_h: number;
  stages: { threshold: number; weak: EngineWeak[] }[];
}

function asArray<T>(x: T | T[] | undefined): T[] {
  if (x === undefined) return [];
  return Array.isArray(x) ? x : [x];
}

function num(text: unknown, what: string): number {
  const v = Number(String(text).trim());
  if (Number.isNaN(v)) {
    throw new Error(`cannot parse number from <${what}>: ${JSON.stringify(text)}`);
  }
  return v;
}

function parseRect(text: string): number[] {
  const parts = String(text).trim().split(/\s+/).map(Number);
  if (parts.length !== 5 || parts.some(Number.isNaN)) {
    throw new Error(`malformed feature rect: ${JSON.stringify(text)}`);
  }
  return parts;
}

function convertOld(root: any): EngineCascade {
  const size = String(root.size).trim().split(/\s+/).map(Number);
  if (size.length !== 2 || size.some(Number.isNaN)) {
    throw new Error(`malformed <size>: ${JSON.stringify(root.size)}`);
  }
  const stages = asArray<any>(root.stages?._).map((stage) => {
    const weak = asArray<any>(stage.trees?._).map((tree) => {
      const nodes = asArray<any>(tree._);
      if (nodes.length !== 1) {
        throw new Error("tree with more than one node (only stumps are supported)");
      }
      const node = nodes[0];
      if (node.left_node !== undefined || node.right_node !== undefined) {
        throw new Error("left_node/right_node split (only stumps are supported)");
      }
      if (node.left_val === undefined || node.right_val === undefined) {
        throw new Error("node without left_val/right_val");
      }
      if (num(node.feature.tilted ?? 0, "tilted") !== 0) {
        throw new Error("tilted feature is not supported");
      }
      return {
        rects: asArray<any>(node.feature.rects?._).map(parseRect),
        threshold: num(node.threshold, "threshold"),
        left: num(node.left_val, "left_val"),
        right: num(node.right_val, "right_val"),
      };
    });
    return { threshold: num(stage.stage_threshold, "stage_threshold"), weak };
  });
  if (stages.length === 0) {
    throw new Error("cascade has no <stages>");
  }
  return { window_w: size[0], window_h: size[1], stages };
}

function convertNew(root: any): EngineCascade {
  if (root.featureType !== undefined && String(root.featureType).trim() !== "HAAR") {
    throw new Error(`featureType ${root.featureType} is not supported (need HAAR)`);
  }
  const features = asArray<any>(root.features?._).map((f) => {
    if (f.tilted !== undefined && num(f.tilted, "tilted") !== 0) {
      throw new Error("tilted feature is not supported");
    }
    return asArray<any>(f.rects?._).map(parseRect);
  });
  const stages = asArray<any>(root.stages?._).map((stage) => {
    const weak = asArray<any>(stage.weakClassifiers?._).map((w) => {
      const nodes = String(w.internalNodes).trim().split(/\s+/);
      if (nodes.length !== 4 || nodes[0] !== "0" || nodes[1] !== "-1") {
        throw new Error(`internalNodes ${JSON.stringify(w.internalNodes)} `
          + "(only single-stump weak classifiers are supported)");
      }
      const leaves = String(w.leafValues).trim().split(/\s+/).map(Number);
      if (leaves.length !== 2 || leaves.some(Number.isNaN)) {
        throw new Error(`malformed leafValues: ${JSON.stringify(w.leafValues)}`);
      }
      const featureIdx = Number(nodes[2]);
      if (!(featureIdx >= 0 && featureIdx < features.length)) {
        throw new Error(`feature index ${nodes[2]} out of range`);
      }
      return {
        rects: features[featureIdx],
        threshold: Number(nodes[3]),
        left: leaves[0],
        right: leaves[1],
      };
    });
    return { threshold: num(stage.stageThreshold, "stageThreshold"), weak };
  });
  if (stages.length === 0) {
    throw new Error("cascade has no <stages>");
  }
  return {
    window_w: num(root.width, "width"),
    window_h: num(root.height, "height"),
    stages,
  };
}

export function convertCascadeXml(xmlText: string): EngineCascade {
  const parser = new XMLParser({
    ignoreAttributes: false,
    attributeNamePrefix: "@_",
    parseTagValue: false,
  });
  const doc = parser.parse(xmlText);
  const storage = doc.opencv_storage;
  if (!storage) {
    throw new Error("missing <opencv_storage> root element");
  }
  for (const [key, value] of Object.entries<any>(storage)) {
    if (value && typeof value === "object") {
      const typeId = value["@_type_id"];
      if (typeId === "opencv-haar-classifier") {
        return convertOld(value);
      }
      if (typeId === "opencv-cascade-classifier") {
        return convertNew(value);
      }
      if (typeId !== undefined) {
        throw new Error(`unknown cascade schema type_id ${JSON.stringify(typeId)} on <${key}>`);
      }
    }
  }
  throw new Error("no cascade element with a recognized type_id found");
}

export function cascadeJson(cascade: EngineCascade): string {
  return JSON.stringify(cascade, null, 1) + "\n";
}
