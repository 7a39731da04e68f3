/** Client-side editing state for one image: committed document + buffered
 * edits. Edits are committed explicitly (Save), mirroring the engine's
 * save-to-sidecar workflow; until then overlays show doc + buffer. */

import type { DocJson, EditJson, ShapeJson } from "./api.js";
import { area, Box, clampBox, Point, rectFromAnchors } from "./geometry.js";

export type Mode = "draw" | "edit";

export interface Overlay {
  id: string;
  label: string;
  box: Box;
  source: "human" | "model";
  confidence?: number;
  pending: boolean;
}

function boxFromPoints(points: [[number, number], [number, number]]): Box {
  return rectFromAnchors(
    { x: points[0][0], y: points[0][1] },
    { x: points[1][0], y: points[1][1] },
  );
}

function pointsFromBox(box: Box): [[number, number], [number, number]] {
  return [
    [box.x1, box.y1],
    [box.x2, box.y2],
  ];
}

let counter = 0;

function freshId(): string {
  counter += 1;
  return `c-${Date.now().toString(36)}-${counter}`;
}

export class CanvasSession {
  doc: DocJson | null = null;
  token = "";
  imageName = "";
  mode: Mode = "draw";
  selection: string | null = null;
  private pending: EditJson[] = [];
  private drawAnchor: Point | null = null;

  loadDoc(imageName: string, doc: DocJson, token: string): void {
    this.imageName = imageName;
    this.doc = doc;
    this.token = token;
    this.pending = [];
    this.selection = null;
    this.drawAnchor = null;
  }

  dirty(): boolean {
    return this.pending.length > 0;
  }

  editsForCommit(): EditJson[] {
    return [...this.pending];
  }

  /** Committed shapes with the buffered edits applied on top. */
  overlays(): Overlay[] {
    if (!this.doc) return [];
    const out: Overlay[] = this.doc.shapes.map((s: ShapeJson) => ({
      id: s.id,
      label: s.label,
      box: boxFromPoints(s.points),
      source: s.source,
      confidence: s.confidence,
      pending: false,
    }));
    for (const e of this.pending) {
      if (e.op === "add") {
        out.push({
          id: e.shape.id,
          label: e.shape.label,
          box: boxFromPoints(e.shape.points),
          source: "human",
          confidence: undefined,
          pending: true,
        });
        continue;
      }
      const i = out.findIndex((o) => o.id === e.shape_id);
      if (i < 0) continue;
      if (e.op === "delete") {
        out.splice(i, 1);
      } else if (e.op === "relabel") {
        // a human vouched for it: restyles from dashed (model) to solid
        out[i] = { ...out[i], label: e.label, source: "human", confidence: undefined, pending: true };
      } else {
        out[i] = { ...out[i], box: boxFromPoints(e.points), source: "human", confidence: undefined, pending: true };
      }
    }
    return out;
  }

  // --- draw mode -----------------------------------------------------------

  /** First anchor click (world coordinates). */
  beginDraw(p: Point): void {
    this.drawAnchor = { ...p };
  }

  previewBox(p: Point): Box | null {
    if (!this.drawAnchor) return null;
    return rectFromAnchors(this.drawAnchor, p);
  }

  /** Second anchor click plus label dialog result; buffers an add edit.
   * Zero-area drags are discarded (returns null). */
  finishDraw(p: Point, label: string): EditJson | null {
    if (!this.doc || !this.drawAnchor) return null;
    const raw = rectFromAnchors(this.drawAnchor, p);
    this.drawAnchor = null;
    const box = clampBox(raw, this.doc.imageWidth, this.doc.imageHeight);
    if (area(box) <= 0 || !label.trim()) return null;
    const edit: EditJson = {
      op: "add",
      shape: {
        id: freshId(),
        label,
        shape_type: "rectangle",
        points: pointsFromBox(box),
        source: "human",
      },
    };
    this.pending.push(edit);
    this.selection = edit.shape.id;
    return edit;
  }

  cancelDraw(): void {
    this.drawAnchor = null;
  }

  // --- edit mode -------------------------------------------------------------

  select(id: string | null): void {
    this.selection = id;
  }

  selectedOverlay(): Overlay | null {
    return this.overlays().find((o) => o.id === this.selection) ?? null;
  }

  private geometryEdit(op: "move" | "resize", box: Box): EditJson | null {
    if (!this.doc || !this.selection) return null;
    const clamped = clampBox(box, this.doc.imageWidth, this.doc.imageHeight);
    const edit: EditJson = {
      op,
      shape_id: this.selection,
      points: pointsFromBox(clamped),
    };
    this.pending.push(edit);
    return edit;
  }

  moveSelected(box: Box): EditJson | null {
    return this.geometryEdit("move", box);
  }

  resizeSelected(box: Box): EditJson | null {
    return this.geometryEdit("resize", box);
  }

  relabelSelected(label: string): EditJson | null {
    if (!this.selection || !label.trim()) return null;
    const edit: EditJson = { op: "relabel", shape_id: this.selection, label };
    this.pending.push(edit);
    return edit;
  }

  deleteSelected(): EditJson | null {
    if (!this.selection) return null;
    const edit: EditJson = { op: "delete", shape_id: this.selection };
    this.pending.push(edit);
    this.selection = null;
    return edit;
  }

  /** Count of labels over the current overlays, for the sidebar list. */
  labelCensus(): [string, number][] {
    const counts = new Map<string, number>();
    for (const o of this.overlays()) {
      counts.set(o.label, (counts.get(o.label) ?? 0) + 1);
    }
    return [...counts.entries()].sort((a, b) => b[1] - a[1] || a[0].localeCompare(b[0]));
  }
}
