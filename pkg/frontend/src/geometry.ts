/** Screen/domain coordinate transforms and interactive region construction. */

import type { Region } from "./api.js";

export interface DomainExtent {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface Point {
  x: number;
  y: number;
}

/**
 * Maps between domain coordinates (y up) and canvas pixels (y down).
 * A zoom factor scales around the view center; the transform pair is exact
 * up to floating-point rounding, far below the one-pixel contract.
 */
export class ViewTransform {
  constructor(
    public readonly extent: DomainExtent,
    public readonly width: number,
    public readonly height: number,
    public readonly zoom: number = 1,
    public readonly panX: number = 0,
    public readonly panY: number = 0,
  ) {}

  private get scaleX(): number {
    return (this.width / (this.extent.x1 - this.extent.x0)) * this.zoom;
  }

  private get scaleY(): number {
    return (this.height / (this.extent.y1 - this.extent.y0)) * this.zoom;
  }

  toScreen(p: Point): Point {
    return {
      x: (p.x - this.extent.x0) * this.scaleX + this.panX,
      y: this.height - (p.y - this.extent.y0) * this.scaleY + this.panY,
    };
  }

  toDomain(p: Point): Point {
    return {
      x: (p.x - this.panX) / this.scaleX + this.extent.x0,
      y: (this.height - (p.y - this.panY)) / this.scaleY + this.extent.y0,
    };
  }

  /** Domain length of one pixel (used for drag thresholds). */
  pixelSize(): number {
    return 1 / Math.max(this.scaleX, this.scaleY);
  }

  withZoom(zoom: number, panX = this.panX, panY = this.panY): ViewTransform {
    return new ViewTransform(this.extent, this.width, this.height, zoom, panX, panY);
  }
}

export class DegenerateRegionError extends Error {}

/** Circle from a center-drag: the press point is the center. */
export function circleFromDrag(start: Point, end: Point): Region {
  const radius = Math.hypot(end.x - start.x, end.y - start.y);
  if (radius <= 0) throw new DegenerateRegionError("zero-radius circle");
  return { kind: "circle", center: [start.x, start.y], radius };
}

/** Axis-aligned ellipse inscribed in the dragged bounding box. */
export function ellipseFromDrag(start: Point, end: Point): Region {
  const rx = Math.abs(end.x - start.x) / 2;
  const ry = Math.abs(end.y - start.y) / 2;
  if (rx <= 0 || ry <= 0) throw new DegenerateRegionError("flat ellipse");
  return {
    kind: "ellipse",
    center: [(start.x + end.x) / 2, (start.y + end.y) / 2],
    radii: [rx, ry],
  };
}

function polygonArea(vertices: [number, number][]): number {
  let twice = 0;
  for (let i = 0; i < vertices.length; i++) {
    const [x0, y0] = vertices[i];
    const [x1, y1] = vertices[(i + 1) % vertices.length];
    twice += x0 * y1 - x1 * y0;
  }
  return Math.abs(twice) / 2;
}

/** Polygon from a click sequence; needs 3+ points and nonzero area. */
export function polygonFromClicks(points: Point[]): Region {
  if (points.length < 3) {
    throw new DegenerateRegionError(`polygon needs 3 points, got ${points.length}`);
  }
  if (points.length > 256) {
    throw new DegenerateRegionError("polygon capped at 256 vertices");
  }
  const vertices = points.map((p) => [p.x, p.y] as [number, number]);
  if (polygonArea(vertices) <= 0) {
    throw new DegenerateRegionError("polygon has zero area");
  }
  return { kind: "polygon", vertices };
}

/** Outline points (domain coordinates) for drawing a committed region. */
export function regionOutline(region: Region, segments = 64): [number, number][] {
  if (region.kind === "circle" || region.kind === "ellipse") {
    const [cx, cy] = region.center;
    const rx = region.kind === "circle" ? region.radius : region.radii[0];
    const ry = region.kind === "circle" ? region.radius : region.radii[1];
    const pts: [number, number][] = [];
    for (let i = 0; i <= segments; i++) {
      const a = (2 * Math.PI * i) / segments;
      pts.push([cx + rx * Math.cos(a), cy + ry * Math.sin(a)]);
    }
    return pts;
  }
  return [...region.vertices, region.vertices[0]];
}
