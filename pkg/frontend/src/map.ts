/** Tile map with circle markers sized by paper count. */

import {
  LABEL_MIN_ZOOM,
  MAX_ZOOM,
  MIN_ZOOM,
  TILE_SIZE,
  normalizeRect,
  rectContains,
  screenPosition,
  tilesFor,
  unproject,
  project,
} from "./geo.js";
import { divergingColor, markerRadius, paletteHalfSpan } from "./scales.js";
import type { ViewState, Viewport } from "./state.js";
import type { RankingDoc, RankingEntryDoc } from "./types.js";

export const DEFAULT_TILE_TEMPLATE = "https://tile.openstreetmap.org/{z}/{x}/{y}.png";

const SVG_NS = "http://www.w3.org/2000/svg";
// a press that moves less than this many pixels counts as a click
const CLICK_SLOP = 4;

export interface MapHandlers {
  onViewportChange(viewport: Viewport): void;
  onToggleSelect(institutionId: string): void;
  onRegionSelect(institutionIds: string[]): void;
}

function tileLayer(viewport: Viewport, width: number, height: number,
                   template: string): HTMLElement {
  const layer = document.createElement("div");
  layer.className = "tile-layer";
  for (const tile of tilesFor(viewport, width, height)) {
    const img = document.createElement("img");
    img.src = template
      .replace("{z}", String(tile.z))
      .replace("{x}", String(tile.x))
      .replace("{y}", String(tile.y));
    img.alt = "";
    img.draggable = false;
    img.width = TILE_SIZE;
    img.height = TILE_SIZE;
    img.style.left = `${tile.left}px`;
    img.style.top = `${tile.top}px`;
    layer.appendChild(img);
  }
  return layer;
}

interface PlacedMarker {
  entry: RankingEntryDoc;
  x: number;
  y: number;
  radius: number;
}

function placeMarkers(doc: RankingDoc, state: ViewState,
                      width: number, height: number): PlacedMarker[] {
  let entries = doc.entries.filter((e) => e.latitude !== null && e.longitude !== null);
  if (state.significantOnly) entries = entries.filter((e) => e.significant_vs_mean);
  const maxPapers = Math.max(...doc.entries.map((e) => e.n_papers), 1);
  const placed = entries.map((entry) => {
    const pos = screenPosition(entry.latitude!, entry.longitude!,
                               state.viewport, width, height);
    return { entry, x: pos.x, y: pos.y, radius: markerRadius(entry.n_papers, maxPapers) };
  });
  // draw large markers first so small ones stay hoverable on top
  placed.sort((a, b) => b.radius - a.radius);
  return placed;
}

function markerLayer(placed: PlacedMarker[], doc: RankingDoc, state: ViewState,
                     width: number, height: number,
                     handlers: MapHandlers): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "marker-layer");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  const halfSpan = paletteHalfSpan(
    doc.entries.map((e) => e.probability), doc.reference_probability,
  );
  for (const marker of placed) {
    const { entry } = marker;
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(marker.x));
    circle.setAttribute("cy", String(marker.y));
    circle.setAttribute("r", String(marker.radius));
    circle.setAttribute("fill", divergingColor(
      entry.probability, doc.reference_probability, halfSpan,
    ));
    circle.setAttribute("fill-opacity", "0.75");
    if (state.selection.includes(entry.institution_id)) {
      circle.setAttribute("stroke", "#000");
      circle.setAttribute("stroke-width", "2.5");
    }
    circle.classList.add("marker");
    circle.addEventListener("click", (event) => {
      event.stopPropagation();
      handlers.onToggleSelect(entry.institution_id);
    });
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${entry.name} (rank ${entry.rank}, ${entry.probability.toFixed(3)})`;
    circle.appendChild(title);
    svg.appendChild(circle);
    if (state.viewport.zoom >= LABEL_MIN_ZOOM) {
      const label = document.createElementNS(SVG_NS, "text");
      label.setAttribute("x", String(marker.x));
      label.setAttribute("y", String(marker.y - marker.radius - 3));
      label.setAttribute("class", "marker-label");
      label.textContent = entry.name;
      svg.appendChild(label);
    }
  }
  return svg;
}

function attachInteraction(container: HTMLElement, state: ViewState,
                           placed: PlacedMarker[], handlers: MapHandlers): void {
  const width = container.clientWidth;
  const height = container.clientHeight;

  container.addEventListener("pointerdown", (down) => {
    if (down.button !== 0) return;
    const startX = down.clientX;
    const startY = down.clientY;
    const origin = container.getBoundingClientRect();
    const selecting = down.shiftKey;
    let rectEl: HTMLElement | null = null;
    let moved = false;

    const onMove = (move: PointerEvent) => {
      const dx = move.clientX - startX;
      const dy = move.clientY - startY;
      if (Math.abs(dx) + Math.abs(dy) > CLICK_SLOP) moved = true;
      if (selecting) {
        if (!rectEl) {
          rectEl = document.createElement("div");
          rectEl.className = "select-rect";
          container.appendChild(rectEl);
        }
        const rect = normalizeRect(startX - origin.left, startY - origin.top,
                                   move.clientX - origin.left, move.clientY - origin.top);
        rectEl.style.left = `${rect.x1}px`;
        rectEl.style.top = `${rect.y1}px`;
        rectEl.style.width = `${rect.x2 - rect.x1}px`;
        rectEl.style.height = `${rect.y2 - rect.y1}px`;
      } else {
        for (const layer of container.querySelectorAll<HTMLElement>(".tile-layer, .marker-layer")) {
          layer.style.transform = `translate(${dx}px, ${dy}px)`;
        }
      }
    };

    const onUp = (up: PointerEvent) => {
      window.removeEventListener("pointermove", onMove);
      window.removeEventListener("pointerup", onUp);
      if (selecting) {
        rectEl?.remove();
        if (!moved) return;
        const rect = normalizeRect(startX - origin.left, startY - origin.top,
                                   up.clientX - origin.left, up.clientY - origin.top);
        const hit = placed
          .filter((m) => rectContains(rect, m.x, m.y))
          .map((m) => m.entry.institution_id);
        if (hit.length > 0) handlers.onRegionSelect(hit);
      } else if (moved) {
        const dx = up.clientX - startX;
        const dy = up.clientY - startY;
        const center = project(state.viewport.lat, state.viewport.lon, state.viewport.zoom);
        const next = unproject(center.x - dx, center.y - dy, state.viewport.zoom);
        handlers.onViewportChange({ ...state.viewport, lat: next.lat, lon: next.lon });
      }
    };

    window.addEventListener("pointermove", onMove);
    window.addEventListener("pointerup", onUp);
  });

  container.addEventListener("wheel", (event) => {
    event.preventDefault();
    const step = event.deltaY < 0 ? 1 : -1;
    const zoom = Math.max(MIN_ZOOM, Math.min(MAX_ZOOM, state.viewport.zoom + step));
    if (zoom === state.viewport.zoom) return;
    // keep the point under the cursor fixed while the scale changes
    const origin = container.getBoundingClientRect();
    const px = event.clientX - origin.left;
    const py = event.clientY - origin.top;
    const under = unproject(
      project(state.viewport.lat, state.viewport.lon, state.viewport.zoom).x + px - width / 2,
      project(state.viewport.lat, state.viewport.lon, state.viewport.zoom).y + py - height / 2,
      state.viewport.zoom,
    );
    const anchor = project(under.lat, under.lon, zoom);
    const next = unproject(anchor.x - (px - width / 2), anchor.y - (py - height / 2), zoom);
    handlers.onViewportChange({ lat: next.lat, lon: next.lon, zoom });
  }, { passive: false });
}

function zoomControls(state: ViewState, handlers: MapHandlers): HTMLElement {
  const box = document.createElement("div");
  box.className = "zoom-controls";
  const mk = (label: string, step: number) => {
    const button = document.createElement("button");
    button.textContent = label;
    button.addEventListener("click", () => {
      const zoom = Math.max(MIN_ZOOM, Math.min(MAX_ZOOM, state.viewport.zoom + step));
      if (zoom !== state.viewport.zoom) {
        handlers.onViewportChange({ ...state.viewport, zoom });
      }
    });
    return button;
  };
  box.append(mk("+", 1), mk("−", -1));
  return box;
}

export function renderMap(
  container: HTMLElement,
  doc: RankingDoc | null,
  state: ViewState,
  handlers: MapHandlers,
  tileTemplate: string = DEFAULT_TILE_TEMPLATE,
): void {
  const width = container.clientWidth;
  const height = container.clientHeight;
  if (width === 0 || height === 0) return;

  const fresh = container.cloneNode(false) as HTMLElement;
  container.replaceWith(fresh);
  fresh.appendChild(tileLayer(state.viewport, width, height, tileTemplate));
  let placed: PlacedMarker[] = [];
  if (doc !== null) {
    placed = placeMarkers(doc, state, width, height);
    fresh.appendChild(markerLayer(placed, doc, state, width, height, handlers));
  }
  fresh.appendChild(zoomControls(state, handlers));
  attachInteraction(fresh, state, placed, handlers);
}
