/** Marker sizing and the diverging marker palette. */

export const MAX_MARKER_RADIUS = 22;

/**
 * Radius of a disc whose area is proportional to the paper count, with
 * the table's largest institution drawn at maxRadius. No lower clamp:
 * clamping would break the area proportionality the map promises.
 */
export function markerRadius(
  nPapers: number, maxPapers: number, maxRadius: number = MAX_MARKER_RADIUS,
): number {
  if (maxPapers <= 0 || nPapers <= 0) return 0;
  return maxRadius * Math.sqrt(nPapers / maxPapers);
}

export function markerArea(radius: number): number {
  return Math.PI * radius * radius;
}

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

// endpoints of the diverging palette; grey sits at the reference rate
const BLUE: Rgb = { r: 33, g: 102, b: 172 };
const GREY: Rgb = { r: 150, g: 150, b: 150 };
const RED: Rgb = { r: 178, g: 24, b: 43 };

function mix(from: Rgb, to: Rgb, t: number): Rgb {
  return {
    r: from.r + (to.r - from.r) * t,
    g: from.g + (to.g - from.g) * t,
    b: from.b + (to.b - from.b) * t,
  };
}

function css(color: Rgb): string {
  return `rgb(${Math.round(color.r)}, ${Math.round(color.g)}, ${Math.round(color.b)})`;
}

/**
 * Diverging color around the reference rate: blue above, grey at the
 * reference, red below, saturating at +-halfSpan.
 */
export function divergingColor(
  probability: number, reference: number, halfSpan: number,
): string {
  if (halfSpan <= 0) return css(GREY);
  const t = Math.max(-1, Math.min(1, (probability - reference) / halfSpan));
  return css(t >= 0 ? mix(GREY, BLUE, t) : mix(GREY, RED, -t));
}

/** Largest deviation from the reference, used as the palette half-span. */
export function paletteHalfSpan(probabilities: number[], reference: number): number {
  let span = 0;
  for (const p of probabilities) span = Math.max(span, Math.abs(p - reference));
  return span > 0 ? span : 1e-9;
}
