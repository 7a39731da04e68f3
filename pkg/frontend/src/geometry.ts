/** Box math shared by drawing, hit-testing, and rendering. Mirrors the
 * server's rules so no client action can produce a box the server rejects. */

export interface Point {
  x: number;
  y: number;
}

export interface Box {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export type Handle = "nw" | "ne" | "sw" | "se";

/** Canonical rectangle from two anchor clicks, in either drag direction. */
export function rectFromAnchors(a: Point, b: Point): Box {
  return {
    x1: Math.min(a.x, b.x),
    y1: Math.min(a.y, b.y),
    x2: Math.max(a.x, b.x),
    y2: Math.max(a.y, b.y),
  };
}

export function area(box: Box): number {
  return (box.x2 - box.x1) * (box.y2 - box.y1);
}

export function clampBox(box: Box, imageW: number, imageH: number): Box {
  const cx = (v: number) => Math.min(Math.max(v, 0), imageW);
  const cy = (v: number) => Math.min(Math.max(v, 0), imageH);
  return { x1: cx(box.x1), y1: cy(box.y1), x2: cx(box.x2), y2: cy(box.y2) };
}

export function containsPoint(box: Box, p: Point): boolean {
  return p.x >= box.x1 && p.x <= box.x2 && p.y >= box.y1 && p.y <= box.y2;
}

export function corners(box: Box): Record<Handle, Point> {
  return {
    nw: { x: box.x1, y: box.y1 },
    ne: { x: box.x2, y: box.y1 },
    sw: { x: box.x1, y: box.y2 },
    se: { x: box.x2, y: box.y2 },
  };
}

/** Which resize handle (if any) lies within `tol` of the point. */
export function hitHandle(box: Box, p: Point, tol: number): Handle | null {
  for (const [handle, corner] of Object.entries(corners(box)) as [Handle, Point][]) {
    if (Math.abs(corner.x - p.x) <= tol && Math.abs(corner.y - p.y) <= tol) {
      return handle;
    }
  }
  return null;
}

/** Drag one corner to a new position; the box re-canonicalizes itself. */
export function moveCorner(box: Box, handle: Handle, p: Point): Box {
  const opposite: Record<Handle, Point> = {
    nw: { x: box.x2, y: box.y2 },
    ne: { x: box.x1, y: box.y2 },
    sw: { x: box.x2, y: box.y1 },
    se: { x: box.x1, y: box.y1 },
  };
  return rectFromAnchors(opposite[handle], p);
}

export function translate(box: Box, dx: number, dy: number): Box {
  return { x1: box.x1 + dx, y1: box.y1 + dy, x2: box.x2 + dx, y2: box.y2 + dy };
}
