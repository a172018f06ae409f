// Canvas trace playback and control rendering. Frames are the service's
// drawable primitives: a dot on a line (pos + vel) or a dot and a goal in
// the unit arena (pos + goal).

import { Frame, Ticket } from "./api.js";
import { frameIndexAt } from "./playback.js";
import { classLabels } from "./state.js";
import type { ViewState } from "./state.js";

function toCanvasX(x: number, width: number): number {
  return ((x + 1) / 2) * width;
}

function toCanvasY(y: number, height: number): number {
  return height - ((y + 1) / 2) * height;
}

export function drawFrame(canvas: HTMLCanvasElement, frame: Frame): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#191d24";
  ctx.fillRect(0, 0, width, height);

  if (frame.goal) {
    // arena task: goal cross + agent dot
    const [gx, gy] = frame.goal;
    ctx.strokeStyle = "#e4b363";
    ctx.lineWidth = 2;
    const cx = toCanvasX(gx, width);
    const cy = toCanvasY(gy, height);
    ctx.beginPath();
    ctx.moveTo(cx - 7, cy);
    ctx.lineTo(cx + 7, cy);
    ctx.moveTo(cx, cy - 7);
    ctx.lineTo(cx, cy + 7);
    ctx.stroke();
    ctx.fillStyle = "#6fc2ff";
    ctx.beginPath();
    ctx.arc(toCanvasX(frame.pos[0], width), toCanvasY(frame.pos[1], height), 8, 0, Math.PI * 2);
    ctx.fill();
  } else {
    // track task: horizontal line, agent dot, velocity arrow
    const mid = height / 2;
    ctx.strokeStyle = "#3a4356";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(0, mid);
    ctx.lineTo(width, mid);
    ctx.stroke();
    const x = toCanvasX(frame.pos[0], width);
    ctx.fillStyle = "#6fc2ff";
    ctx.beginPath();
    ctx.arc(x, mid, 9, 0, Math.PI * 2);
    ctx.fill();
    const vel = frame.vel ?? 0;
    ctx.strokeStyle = vel >= 0 ? "#7ad07a" : "#e06c75";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(x, mid);
    ctx.lineTo(x + vel * 80, mid);
    ctx.stroke();
  }
}

export interface Dom {
  status: HTMLElement;
  clips: HTMLElement;
  controls: HTMLElement;
  statsPanel: HTMLElement;
  sparkline: HTMLCanvasElement;
}

export class Renderer {
  private canvases: HTMLCanvasElement[] = [];
  private frameSets: Frame[][] = [];
  private clipStart = performance.now();
  private animating = false;

  constructor(
    private readonly dom: Dom,
    private readonly onRate: (classIndex: number) => void,
    private readonly onPrefer: (side: "first" | "second") => void,
  ) {}

  apply(state: ViewState): void {
    this.renderStatus(state);
    this.renderControls(state);
    this.renderStats(state);
    if (state.ticket) {
      this.mountClips(state.ticket);
    } else {
      this.frameSets = [];
      this.dom.clips.replaceChildren();
    }
  }

  private renderStatus(state: ViewState): void {
    const labels: Record<string, string> = {
      connecting: "connecting to the labeling service...",
      idle: "waiting for the next query (the learner is training)...",
      labeling: "rate what you see",
      submitting: "sending...",
      finished: "label budget exhausted; training continues on its own",
      offline: `service unreachable, retrying: ${state.message ?? ""}`,
    };
    this.dom.status.textContent = state.message && state.phase === "labeling"
      ? `rejected (${state.message}); showing a fresh query`
      : labels[state.phase] ?? state.phase;
    this.dom.status.dataset.phase = state.phase;
  }

  private renderControls(state: ViewState): void {
    const controls = this.dom.controls;
    controls.replaceChildren();
    const ticket = state.ticket;
    if (!ticket) return;
    if (ticket.kind === "rating") {
      const labels = classLabels(ticket.n);
      labels.forEach((label, i) => {
        const button = document.createElement("button");
        button.textContent = `${i}: ${label}`;
        button.dataset.classIndex = String(i);
        button.addEventListener("click", () => this.onRate(i));
        controls.appendChild(button);
      });
      const hint = document.createElement("p");
      hint.className = "hint";
      hint.textContent = "keys 0-9 rate";
      controls.appendChild(hint);
    } else {
      const left = document.createElement("button");
      left.textContent = "← A is better";
      left.addEventListener("click", () => this.onPrefer("first"));
      const right = document.createElement("button");
      right.textContent = "B is better →";
      right.addEventListener("click", () => this.onPrefer("second"));
      controls.append(left, right);
      const hint = document.createElement("p");
      hint.className = "hint";
      hint.textContent = "arrow keys choose";
      controls.appendChild(hint);
    }
  }

  private renderStats(state: ViewState): void {
    const stats = state.stats;
    const panel = this.dom.statsPanel;
    if (!stats) {
      panel.textContent = "";
      return;
    }
    const counts = stats.class_counts.map((c, i) => `${i}:${c}`).join("  ");
    panel.textContent =
      `labels ${stats.labels_total}  |  budget left ${stats.budget_remaining}  |  per class ${counts}`;
    drawSparkline(this.dom.sparkline, state.curve.map((row) => row.mean_gt_return));
  }

  private mountClips(ticket: Ticket): void {
    const sets = ticket.kind === "rating" ? [ticket.frames] : ticket.frame_pairs;
    this.dom.clips.replaceChildren();
    this.canvases = sets.map((_, i) => {
      const wrap = document.createElement("div");
      wrap.className = "clip";
      if (sets.length === 2) {
        const tag = document.createElement("span");
        tag.textContent = i === 0 ? "A" : "B";
        wrap.appendChild(tag);
      }
      const canvas = document.createElement("canvas");
      canvas.width = 360;
      canvas.height = 200;
      wrap.appendChild(canvas);
      this.dom.clips.appendChild(wrap);
      return canvas;
    });
    this.frameSets = sets;
    this.clipStart = performance.now();
    if (!this.animating) {
      this.animating = true;
      requestAnimationFrame(() => this.tick());
    }
  }

  private tick(): void {
    if (this.frameSets.length === 0) {
      this.animating = false;
      return;
    }
    const elapsed = performance.now() - this.clipStart;
    this.frameSets.forEach((frames, i) => {
      const frame = frames[frameIndexAt(elapsed, frames.length)];
      if (frame) drawFrame(this.canvases[i], frame);
    });
    requestAnimationFrame(() => this.tick());
  }
}

export function drawSparkline(canvas: HTMLCanvasElement, values: number[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (values.length < 2) return;
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  ctx.strokeStyle = "#7ad07a";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = (i / (values.length - 1)) * canvas.width;
    const y = canvas.height - ((v - lo) / span) * (canvas.height - 4) - 2;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
