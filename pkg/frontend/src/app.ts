/** Browser entry point: top menu bar, label list on the left, canvas on the
 * right. Draw places two anchor points; Edit drags whole boxes or corner
 * handles; Detect/Train/Save call the engine. */

import { ApiClient, ConflictError } from "./api.js";
import { Box, containsPoint, hitHandle, moveCorner, Point, translate } from "./geometry.js";
import { CanvasSession, Overlay } from "./session.js";
import { ViewTransform } from "./view.js";

const HANDLE_TOL_PX = 6;

interface DragState {
  kind: "move" | "resize" | "pan";
  handle?: ReturnType<typeof hitHandle>;
  start: Point; // world
  originalBox?: Box;
}

class App {
  api: ApiClient;
  session = new CanvasSession();
  view = new ViewTransform();
  canvas: HTMLCanvasElement;
  ctx: CanvasRenderingContext2D;
  image = new Image();
  imageLoaded = false;
  projectId = "";
  images: string[] = [];
  current = 0;
  drag: DragState | null = null;

  constructor() {
    this.api = new ApiClient(localStorage.getItem("ladder.url") ?? "http://127.0.0.1:8000");
    this.canvas = document.getElementById("canvas") as HTMLCanvasElement;
    this.ctx = this.canvas.getContext("2d")!;
    this.bindMenu();
    this.bindCanvas();
    this.resize();
    window.addEventListener("resize", () => this.resize());
  }

  banner(text: string, kind: "error" | "info" = "error"): void {
    const el = document.getElementById("banner")!;
    el.textContent = text;
    el.className = `banner ${kind} visible`;
    setTimeout(() => el.classList.remove("visible"), 6000);
  }

  bindMenu(): void {
    const by = (id: string) => document.getElementById(id)!;
    by("btn-open").addEventListener("click", () => void this.openProject());
    by("btn-zoom-in").addEventListener("click", () => this.zoomCenter(1.25));
    by("btn-zoom-out").addEventListener("click", () => this.zoomCenter(1 / 1.25));
    by("btn-draw").addEventListener("click", () => this.setMode("draw"));
    by("btn-edit").addEventListener("click", () => this.setMode("edit"));
    by("btn-detect").addEventListener("click", () => void this.runDetect());
    by("btn-train").addEventListener("click", () => void this.runTrain());
    by("btn-save").addEventListener("click", () => void this.save());
    by("btn-prev").addEventListener("click", () => void this.step(-1));
    by("btn-next").addEventListener("click", () => void this.step(1));
    document.addEventListener("keydown", (e) => {
      if (e.key === "Delete" || e.key === "Backspace") {
        if (this.session.mode === "edit" && this.session.deleteSelected()) this.render();
      } else if (e.key === "Escape") {
        this.session.cancelDraw();
        this.render();
      }
    });
  }

  zoomCenter(factor: number): void {
    this.view.zoomAt({ x: this.canvas.width / 2, y: this.canvas.height / 2 }, factor);
    this.render();
  }

  setMode(mode: "draw" | "edit"): void {
    this.session.mode = mode;
    document.getElementById("btn-draw")!.classList.toggle("active", mode === "draw");
    document.getElementById("btn-edit")!.classList.toggle("active", mode === "edit");
  }

  async openProject(): Promise<void> {
    const pid = prompt("Project id:", this.projectId || "demo");
    if (!pid) return;
    try {
      await this.api.getProject(pid);
      this.projectId = pid;
      this.images = await this.api.listImages(pid);
      if (!this.images.length) {
        this.banner("project has no images");
        return;
      }
      this.current = 0;
      await this.loadImage();
    } catch (e) {
      this.banner(`cannot open project: ${e}`);
    }
  }

  async loadImage(): Promise<void> {
    const name = this.images[this.current];
    const { doc, token } = await this.api.getAnnotations(this.projectId, name);
    this.session.loadDoc(name, doc, token);
    this.imageLoaded = false;
    await new Promise<void>((resolve, reject) => {
      this.image.onload = () => resolve();
      this.image.onerror = () => reject(new Error(`cannot load ${name}`));
      this.image.src = this.api.imageUrl(this.projectId, name);
    });
    this.imageLoaded = true;
    this.view.fitTo(doc.imageWidth, doc.imageHeight, this.canvas.width, this.canvas.height);
    document.getElementById("image-name")!.textContent =
      `${name} (${this.current + 1}/${this.images.length})`;
    this.render();
  }

  async step(delta: number): Promise<void> {
    if (!this.images.length) return;
    if (this.session.dirty() && !confirm("Discard unsaved edits?")) return;
    this.current = (this.current + delta + this.images.length) % this.images.length;
    await this.loadImage();
  }

  async runDetect(): Promise<void> {
    if (!this.projectId) return;
    try {
      const result = await this.api.detect(this.projectId, [this.images[this.current]]);
      await this.loadImage();
      const n = result.counts[this.images[this.current]] ?? 0;
      this.banner(`detect: ${n} proposal(s)`, "info");
    } catch (e) {
      this.banner(`detect failed: ${e}`);
    }
  }

  async runTrain(): Promise<void> {
    if (!this.projectId) return;
    try {
      const version = await this.api.train(this.projectId, 1);
      this.banner(`training version ${version.version_id}…`, "info");
      const poll = setInterval(async () => {
        const models = await this.api.models(this.projectId);
        const v = models.find((m) => m.version_id === version.version_id);
        if (v && v.status !== "training") {
          clearInterval(poll);
          this.banner(`version ${v.version_id}: ${v.status}`, v.status === "ready" ? "info" : "error");
        }
      }, 1000);
    } catch (e) {
      this.banner(`train rejected: ${e}`);
    }
  }

  async save(): Promise<void> {
    if (!this.session.dirty()) {
      this.banner("nothing to save", "info");
      return;
    }
    try {
      const resp = await this.api.putAnnotations(
        this.projectId,
        this.session.imageName,
        this.session.token,
        this.session.editsForCommit(),
      );
      this.session.loadDoc(this.session.imageName, resp.doc, resp.token);
      this.banner("saved", "info");
      this.render();
    } catch (e) {
      if (e instanceof ConflictError) {
        if (confirm("Someone else saved first. Reload their version? (your edits are dropped)")) {
          this.session.loadDoc(this.session.imageName, e.doc, e.token);
          this.render();
        }
      } else {
        this.banner(`save failed: ${e}`);
      }
    }
  }

  // --- canvas interaction ----------------------------------------------------

  private canvasPoint(ev: MouseEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  bindCanvas(): void {
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.view.zoomAt(this.canvasPoint(ev), ev.deltaY < 0 ? 1.15 : 1 / 1.15);
      this.render();
    });
    this.canvas.addEventListener("mousedown", (ev) => this.onMouseDown(ev));
    this.canvas.addEventListener("mousemove", (ev) => this.onMouseMove(ev));
    this.canvas.addEventListener("mouseup", (ev) => this.onMouseUp(ev));
  }

  onMouseDown(ev: MouseEvent): void {
    if (!this.session.doc) return;
    const screen = this.canvasPoint(ev);
    const world = this.view.screenToWorld(screen);
    if (ev.button === 1 || ev.shiftKey) {
      this.drag = { kind: "pan", start: screen };
      return;
    }
    if (this.session.mode === "draw") {
      if (!this.session.previewBox(world)) {
        this.session.beginDraw(world);
      } else {
        const label = prompt("Label:");
        const edit = this.session.finishDraw(world, label ?? "");
        if (!edit) this.banner("discarded: zero-area box or empty label");
        this.refreshSidebar();
      }
      this.render();
      return;
    }
    // edit mode: handle first, then body
    const selected = this.session.selectedOverlay();
    const tolWorld = HANDLE_TOL_PX / this.view.scale;
    if (selected) {
      const handle = hitHandle(selected.box, world, tolWorld);
      if (handle) {
        this.drag = { kind: "resize", handle, start: world, originalBox: selected.box };
        return;
      }
    }
    const hit = [...this.session.overlays()].reverse().find((o) => containsPoint(o.box, world));
    this.session.select(hit?.id ?? null);
    if (hit) {
      this.drag = { kind: "move", start: world, originalBox: hit.box };
    }
    this.render();
  }

  onMouseMove(ev: MouseEvent): void {
    const screen = this.canvasPoint(ev);
    if (this.drag?.kind === "pan") {
      this.view.panBy(screen.x - this.drag.start.x, screen.y - this.drag.start.y);
      this.drag.start = screen;
      this.render();
      return;
    }
    if (this.session.mode === "draw" && this.session.previewBox(this.view.screenToWorld(screen))) {
      this.render(this.view.screenToWorld(screen));
    }
  }

  onMouseUp(ev: MouseEvent): void {
    if (!this.drag || this.drag.kind === "pan") {
      this.drag = null;
      return;
    }
    const world = this.view.screenToWorld(this.canvasPoint(ev));
    const { kind, handle, start, originalBox } = this.drag;
    this.drag = null;
    if (!originalBox) return;
    if (kind === "move") {
      const moved = translate(originalBox, world.x - start.x, world.y - start.y);
      if (world.x !== start.x || world.y !== start.y) this.session.moveSelected(moved);
    } else if (kind === "resize" && handle) {
      this.session.resizeSelected(moveCorner(originalBox, handle, world));
    }
    this.refreshSidebar();
    this.render();
  }

  // --- rendering ---------------------------------------------------------------

  resize(): void {
    const holder = document.getElementById("canvas-holder")!;
    this.canvas.width = holder.clientWidth;
    this.canvas.height = holder.clientHeight;
    this.render();
  }

  refreshSidebar(): void {
    const list = document.getElementById("label-list")!;
    list.innerHTML = "";
    for (const [label, count] of this.session.labelCensus()) {
      const li = document.createElement("li");
      li.textContent = `${label} × ${count}`;
      list.appendChild(li);
    }
  }

  render(preview?: Point): void {
    const { ctx, canvas } = this;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (!this.session.doc || !this.imageLoaded) return;
    const origin = this.view.worldToScreen({ x: 0, y: 0 });
    ctx.drawImage(
      this.image,
      origin.x,
      origin.y,
      this.session.doc.imageWidth * this.view.scale,
      this.session.doc.imageHeight * this.view.scale,
    );
    for (const overlay of this.session.overlays()) {
      this.drawOverlay(overlay);
    }
    const box = preview && this.session.previewBox(preview);
    if (box) {
      const s = this.view.worldBoxToScreen(box);
      ctx.setLineDash([4, 3]);
      ctx.strokeStyle = "#2a6fdb";
      ctx.strokeRect(s.x1, s.y1, s.x2 - s.x1, s.y2 - s.y1);
      ctx.setLineDash([]);
    }
  }

  drawOverlay(o: Overlay): void {
    const { ctx } = this;
    const s = this.view.worldBoxToScreen(o.box);
    const selected = o.id === this.session.selection;
    ctx.lineWidth = selected ? 2.5 : 1.5;
    // model proposals render dashed until a human touches them
    ctx.setLineDash(o.source === "model" ? [6, 4] : []);
    ctx.strokeStyle = o.source === "model" ? "#d88a1a" : "#2f9e44";
    ctx.strokeRect(s.x1, s.y1, s.x2 - s.x1, s.y2 - s.y1);
    ctx.setLineDash([]);
    const badge = o.confidence !== undefined ? ` ${(o.confidence * 100).toFixed(0)}%` : "";
    ctx.font = "12px sans-serif";
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(`${o.label}${badge}`, s.x1 + 2, Math.max(12, s.y1 - 3));
    if (selected) {
      ctx.fillStyle = "#1c7ed6";
      for (const corner of [
        { x: s.x1, y: s.y1 },
        { x: s.x2, y: s.y1 },
        { x: s.x1, y: s.y2 },
        { x: s.x2, y: s.y2 },
      ]) {
        ctx.fillRect(corner.x - 3, corner.y - 3, 6, 6);
      }
    }
  }
}

window.addEventListener("DOMContentLoaded", () => {
  const app = new App();
  (window as unknown as { ladderApp: App }).ladderApp = app;
});
