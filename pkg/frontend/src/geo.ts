/** Web Mercator math for a 256 px slippy tile grid. */

import type { Viewport } from "./state.js";

export const TILE_SIZE = 256;
export const MIN_ZOOM = 1;
export const MAX_ZOOM = 12;
/** institution names are drawn on the map only at this zoom or deeper */
export const LABEL_MIN_ZOOM = 5;

export interface WorldPoint {
  x: number;
  y: number;
}

/** Geographic coordinates to world pixels at a zoom level. */
export function project(lat: number, lon: number, zoom: number): WorldPoint {
  const scale = TILE_SIZE * 2 ** zoom;
  const rad = (lat * Math.PI) / 180;
  const mercN = Math.log(Math.tan(Math.PI / 4 + rad / 2));
  return {
    x: ((lon + 180) / 360) * scale,
    y: (0.5 - mercN / (2 * Math.PI)) * scale,
  };
}

export function unproject(x: number, y: number, zoom: number): { lat: number; lon: number } {
  const scale = TILE_SIZE * 2 ** zoom;
  const mercN = (0.5 - y / scale) * 2 * Math.PI;
  return {
    lat: ((2 * Math.atan(Math.exp(mercN)) - Math.PI / 2) * 180) / Math.PI,
    lon: (x / scale) * 360 - 180,
  };
}

/** Container pixel position of a geographic point under a viewport. */
export function screenPosition(
  lat: number, lon: number, viewport: Viewport, width: number, height: number,
): { x: number; y: number } {
  const center = project(viewport.lat, viewport.lon, viewport.zoom);
  const point = project(lat, lon, viewport.zoom);
  return { x: point.x - center.x + width / 2, y: point.y - center.y + height / 2 };
}

export interface TilePlacement {
  z: number;
  x: number;
  y: number;
  /** container pixel offset of the tile's top-left corner */
  left: number;
  top: number;
}

/** Tiles covering a width x height container centered on the viewport.

    Horizontal indices wrap around the antimeridian; vertical indices
    outside the world are dropped rather than clamped. */
export function tilesFor(viewport: Viewport, width: number, height: number): TilePlacement[] {
  const z = viewport.zoom;
  const n = 2 ** z;
  const center = project(viewport.lat, viewport.lon, z);
  const originX = center.x - width / 2;
  const originY = center.y - height / 2;
  const placements: TilePlacement[] = [];
  for (let tx = Math.floor(originX / TILE_SIZE); tx * TILE_SIZE < originX + width; tx++) {
    for (let ty = Math.floor(originY / TILE_SIZE); ty * TILE_SIZE < originY + height; ty++) {
      if (ty < 0 || ty >= n) continue;
      placements.push({
        z,
        x: ((tx % n) + n) % n,
        y: ty,
        left: tx * TILE_SIZE - originX,
        top: ty * TILE_SIZE - originY,
      });
    }
  }
  return placements;
}

export interface PixelRect {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

/** Rectangle from two drag corners, normalized so x1 <= x2 and y1 <= y2. */
export function normalizeRect(ax: number, ay: number, bx: number, by: number): PixelRect {
  return {
    x1: Math.min(ax, bx),
    y1: Math.min(ay, by),
    x2: Math.max(ax, bx),
    y2: Math.max(ay, by),
  };
}

export function rectContains(rect: PixelRect, x: number, y: number): boolean {
  return rect.x1 <= x && x <= rect.x2 && rect.y1 <= y && y <= rect.y2;
}
