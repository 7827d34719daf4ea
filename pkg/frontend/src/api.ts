/** Wire types and client for the query service (field names must match the
 * server exactly; see docs/API.md and fixtures/query_request.schema.json). */

export type Region =
  | { kind: "circle"; center: [number, number]; radius: number }
  | { kind: "ellipse"; center: [number, number]; radii: [number, number] }
  | { kind: "polygon"; vertices: [number, number][] };

export type Colormap = "viridis" | "grayscale" | "diverging";

export interface QueryRequest {
  region: Region;
  bins: number | "auto";
  include_grid: boolean;
  include_raster: boolean;
  include_reference: boolean;
  probe: [number, number] | null;
  colormap: Colormap;
}

export interface SeedSummary {
  index: number;
  seed: [number, number];
  valid_steps: number;
  bins: number[] | null;
  divergence: number | null;
}

export interface QueryResponse {
  cache_id: string;
  field: {
    nx: number;
    ny: number;
    origin: [number, number];
    spacing: [number, number];
    encoding: string;
    grid_b64?: string;
    raster_png_b64?: string;
  };
  reference_bins: number[] | null;
  most_dissimilar: SeedSummary | null;
  probe: SeedSummary | null;
  timing: { reference_ms: number; field_ms: number };
  provenance: Record<string, unknown> & { region: Record<string, unknown>; bins: number };
}

export interface CacheSummary {
  id: string;
  seeds: number;
  nx: number;
  ny: number;
  n_steps: number;
  t0: number;
  tau: number;
  dt_sample: number;
  direction: number;
  origin: [number, number];
  spacing: [number, number];
  extent: [number, number];
  byte_size: number;
  fingerprint: string;
}

/** Build a complete request payload with the service's defaults filled in. */
export function buildQueryRequest(
  region: Region,
  options: Partial<Omit<QueryRequest, "region">> = {},
): QueryRequest {
  return {
    region,
    bins: options.bins ?? "auto",
    include_grid: options.include_grid ?? true,
    include_raster: options.include_raster ?? true,
    include_reference: options.include_reference ?? true,
    probe: options.probe ?? null,
    colormap: options.colormap ?? "viridis",
  };
}

/** Decode the base64 float32 grid into a row-major array (NaN = masked). */
export function decodeGrid(b64: string, nx: number, ny: number): Float32Array {
  const raw = atob(b64);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  const grid = new Float32Array(bytes.buffer);
  if (grid.length !== nx * ny) {
    throw new Error(`grid payload has ${grid.length} values, expected ${nx * ny}`);
  }
  return grid;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  async datasets(): Promise<CacheSummary[]> {
    const res = await fetch(`${this.baseUrl}/datasets`);
    if (!res.ok) throw new Error(`datasets: HTTP ${res.status}`);
    return (await res.json()).caches;
  }

  async query(cacheId: string, request: QueryRequest): Promise<QueryResponse> {
    const res = await fetch(`${this.baseUrl}/cache/${cacheId}/query`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!res.ok) {
      const detail = await res.text();
      throw new Error(`query: HTTP ${res.status}: ${detail}`);
    }
    return res.json();
  }

  async probe(cacheId: string, x: number, y: number, n: number | "auto" = "auto") {
    const params = new URLSearchParams({ x: String(x), y: String(y), n: String(n) });
    const res = await fetch(`${this.baseUrl}/cache/${cacheId}/probe?${params}`);
    if (!res.ok) throw new Error(`probe: HTTP ${res.status}`);
    return res.json();
  }
}
