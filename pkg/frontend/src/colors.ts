/** Histogram panel series styling.
 *
 * The reference distribution draws its strain half in red and its rotation
 * half in blue; the compared pathline (pinned probe, or the most dissimilar
 * seed by default) overlays in yellow and cyan respectively.
 */

export const SERIES_COLORS = {
  referenceAlpha: "#d62728",
  referenceBeta: "#1f77b4",
  probeAlpha: "#ffdf22",
  probeBeta: "#17becf",
} as const;

export interface HistogramSeries {
  label: string;
  color: string;
  values: number[];
}

/** Split a concatenated 2n-bin histogram into its alpha/beta halves. */
export function splitHalves(bins: number[]): { alpha: number[]; beta: number[] } {
  const n = Math.floor(bins.length / 2);
  return { alpha: bins.slice(0, n), beta: bins.slice(n) };
}

/**
 * Assemble the panel series: reference first (red/blue), then the compared
 * pathline (yellow/cyan) when available.
 */
export function histogramSeries(
  referenceBins: number[] | null,
  compareBins: number[] | null,
  compareLabel: string,
): HistogramSeries[] {
  const series: HistogramSeries[] = [];
  if (referenceBins) {
    const { alpha, beta } = splitHalves(referenceBins);
    series.push({ label: "reference strain", color: SERIES_COLORS.referenceAlpha, values: alpha });
    series.push({ label: "reference rotation", color: SERIES_COLORS.referenceBeta, values: beta });
  }
  if (compareBins) {
    const { alpha, beta } = splitHalves(compareBins);
    series.push({ label: `${compareLabel} strain`, color: SERIES_COLORS.probeAlpha, values: alpha });
    series.push({ label: `${compareLabel} rotation`, color: SERIES_COLORS.probeBeta, values: beta });
  }
  return series;
}
