/** Explorer view state: optimistic region edits, debounced queries, at most
 * one in-flight request, and superseded responses discarded by sequence
 * number.  The displayed field always corresponds to the provenance echoed
 * in the displayed response; the editable region overlay may run ahead of it.
 */

import { buildQueryRequest, Colormap, QueryRequest, QueryResponse, Region } from "./api.js";

export interface ViewState {
  cacheId: string | null;
  region: Region | null;
  colormap: Colormap;
  bins: number | "auto";
  probe: [number, number] | null;
  lastResponse: QueryResponse | null;
}

export type QueryRunner = (cacheId: string, req: QueryRequest) => Promise<QueryResponse>;

export class ExplorerState {
  readonly view: ViewState = {
    cacheId: null,
    region: null,
    colormap: "viridis",
    bins: "auto",
    probe: null,
    lastResponse: null,
  };

  /** Sequence number of the latest committed edit. */
  private desiredSeq = 0;
  /** Sequence number the in-flight request was issued for, or null. */
  private inFlightSeq: number | null = null;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private issuedCount = 0;

  onResponse: (resp: QueryResponse) => void = () => {};
  onError: (err: unknown) => void = () => {};

  constructor(
    private readonly runQuery: QueryRunner,
    readonly debounceMs: number = 150,
  ) {}

  /** Provenance of what is actually rendered (null until a response lands). */
  get displayedProvenance(): Record<string, unknown> | null {
    return this.view.lastResponse ? this.view.lastResponse.provenance : null;
  }

  get requestsIssued(): number {
    return this.issuedCount;
  }

  selectCache(cacheId: string): void {
    this.view.cacheId = cacheId;
    this.view.lastResponse = null;
    this.view.region = null;
  }

  commitRegion(region: Region): void {
    this.view.region = region;
    this.scheduleQuery();
  }

  setColormap(colormap: Colormap): void {
    this.view.colormap = colormap;
    this.scheduleQuery();
  }

  setBins(bins: number | "auto"): void {
    this.view.bins = bins;
    this.scheduleQuery();
  }

  /** Pin a probe point (null reverts to the most-dissimilar-seed overlay). */
  setProbe(probe: [number, number] | null): void {
    this.view.probe = probe;
    this.scheduleQuery();
  }

  private scheduleQuery(): void {
    if (!this.view.cacheId || !this.view.region) return;
    this.desiredSeq += 1;
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      this.issue();
    }, this.debounceMs);
  }

  private issue(): void {
    if (this.inFlightSeq !== null) return; // picked up again when it resolves
    if (!this.view.cacheId || !this.view.region) return;
    const issuedFor = this.desiredSeq;
    this.inFlightSeq = issuedFor;
    this.issuedCount += 1;
    const request = buildQueryRequest(this.view.region, {
      bins: this.view.bins,
      probe: this.view.probe,
      colormap: this.view.colormap,
    });
    this.runQuery(this.view.cacheId, request).then(
      (resp) => {
        this.inFlightSeq = null;
        if (issuedFor === this.desiredSeq) {
          this.view.lastResponse = resp;
          this.onResponse(resp);
        } else {
          this.issue(); // superseded: discard and fetch the current state
        }
      },
      (err) => {
        this.inFlightSeq = null;
        this.onError(err);
        if (issuedFor !== this.desiredSeq) this.issue();
      },
    );
  }
}
