// Contract tests: what the client sends must validate against the service's
// own request schema (fixtures/query_request.schema.json, regenerated with
// `pathdyn schema --out frontend/fixtures/query_request.schema.json`).

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { buildQueryRequest } from "../src/api.js";
import { circleFromDrag, ellipseFromDrag, polygonFromClicks } from "../src/geometry.js";
import { validateAgainstSchema } from "../src/schema.js";

const here = dirname(fileURLToPath(import.meta.url));
const schema = JSON.parse(
  readFileSync(join(here, "..", "fixtures", "query_request.schema.json"), "utf-8"),
);

describe("query request contract", () => {
  it("committed circle serializes to a schema-valid request", () => {
    const region = circleFromDrag({ x: 0.2, y: 0.2 }, { x: 0.3, y: 0.2 });
    const req = buildQueryRequest(region, { probe: [1.0, 0.5] });
    expect(validateAgainstSchema(req, schema)).toEqual([]);
  });

  it("committed ellipse and polygon serialize to schema-valid requests", () => {
    const ellipse = ellipseFromDrag({ x: 0, y: 0 }, { x: 0.4, y: 0.2 });
    expect(validateAgainstSchema(buildQueryRequest(ellipse), schema)).toEqual([]);
    const polygon = polygonFromClicks([
      { x: 0, y: 0 },
      { x: 1, y: 0 },
      { x: 0, y: 1 },
    ]);
    expect(validateAgainstSchema(buildQueryRequest(polygon, { bins: 24 }), schema)).toEqual([]);
  });

  it("defaults match the service defaults", () => {
    const req = buildQueryRequest({ kind: "circle", center: [0, 0], radius: 1 });
    expect(req.bins).toBe("auto");
    expect(req.include_reference).toBe(true);
    expect(schema.properties.bins.default).toBe("auto");
    expect(schema.properties.include_reference.default).toBe(true);
  });

  it("the validator itself rejects malformed regions", () => {
    const bad = {
      region: { kind: "circle", center: [0, 0], radius: 0 },
      bins: "auto",
      include_grid: true,
      include_raster: false,
      include_reference: true,
      probe: null,
      colormap: "viridis",
    };
    expect(validateAgainstSchema(bad, schema)).not.toEqual([]);
    const wrongKind = { ...bad, region: { kind: "blob" } };
    expect(validateAgainstSchema(wrongKind, schema)).not.toEqual([]);
    const missingRegion = { bins: "auto" };
    expect(validateAgainstSchema(missingRegion, schema)).not.toEqual([]);
  });
});
