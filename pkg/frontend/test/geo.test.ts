import { describe, expect, it } from "vitest";

import {
  TILE_SIZE,
  normalizeRect,
  project,
  rectContains,
  screenPosition,
  tilesFor,
  unproject,
} from "../src/geo.js";
import { StaleGate, rankingUrl } from "../src/api.js";

describe("mercator projection", () => {
  it("maps the null island to the world center", () => {
    for (const zoom of [1, 3, 8]) {
      const scale = TILE_SIZE * 2 ** zoom;
      const p = project(0, 0, zoom);
      expect(p.x).toBeCloseTo(scale / 2, 9);
      expect(p.y).toBeCloseTo(scale / 2, 9);
    }
  });

  it("round trips through unproject", () => {
    for (const [lat, lon] of [[52.52, 13.40], [-33.86, 151.21], [64.13, -21.82]]) {
      const p = project(lat, lon, 6);
      const geo = unproject(p.x, p.y, 6);
      expect(geo.lat).toBeCloseTo(lat, 9);
      expect(geo.lon).toBeCloseTo(lon, 9);
    }
  });

  it("keeps the viewport center in the middle of the screen", () => {
    const viewport = { lat: 48.2, lon: 16.37, zoom: 5 };
    const pos = screenPosition(48.2, 16.37, viewport, 800, 600);
    expect(pos.x).toBeCloseTo(400, 9);
    expect(pos.y).toBeCloseTo(300, 9);
  });
});

describe("tile cover", () => {
  it("covers the whole container", () => {
    const width = 700;
    const height = 500;
    const tiles = tilesFor({ lat: 40, lon: -3.7, zoom: 5 }, width, height);
    expect(tiles.length).toBeGreaterThan(0);
    expect(Math.min(...tiles.map((t) => t.left))).toBeLessThanOrEqual(0);
    expect(Math.max(...tiles.map((t) => t.left + TILE_SIZE))).toBeGreaterThanOrEqual(width);
    expect(Math.min(...tiles.map((t) => t.top))).toBeLessThanOrEqual(0);
    expect(Math.max(...tiles.map((t) => t.top + TILE_SIZE))).toBeGreaterThanOrEqual(height);
  });

  it("wraps tile columns across the antimeridian", () => {
    const tiles = tilesFor({ lat: 0, lon: 179.5, zoom: 3 }, 600, 300);
    const n = 2 ** 3;
    for (const tile of tiles) {
      expect(tile.x).toBeGreaterThanOrEqual(0);
      expect(tile.x).toBeLessThan(n);
      expect(tile.y).toBeGreaterThanOrEqual(0);
      expect(tile.y).toBeLessThan(n);
    }
  });
});

describe("drag rectangle", () => {
  it("normalizes any corner order", () => {
    expect(normalizeRect(10, 80, 50, 20)).toEqual({ x1: 10, y1: 20, x2: 50, y2: 80 });
  });

  it("contains boundary points", () => {
    const rect = normalizeRect(0, 0, 100, 50);
    expect(rectContains(rect, 100, 50)).toBe(true);
    expect(rectContains(rect, 101, 25)).toBe(false);
  });
});

describe("api plumbing", () => {
  it("spells a missing covariate as none", () => {
    expect(rankingUrl("ed-1", "CHEM", "best_paper", null))
      .toBe("/api/rankings?edition=ed-1&subject=CHEM&indicator=best_paper&covariate=none");
    expect(rankingUrl("ed-1", "CHEM", "best_paper", "gdp")).toContain("covariate=gdp");
  });

  it("stale gate keeps only the newest ticket valid", () => {
    const gate = new StaleGate();
    const first = gate.issue();
    expect(gate.isCurrent(first)).toBe(true);
    const second = gate.issue();
    expect(gate.isCurrent(first)).toBe(false);
    expect(gate.isCurrent(second)).toBe(true);
  });
});
