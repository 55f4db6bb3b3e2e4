// Top-down scalp view. The projection table maps each LED to (u, v) where
// u points toward the nose and v toward the subject's LEFT ear, so on
// screen (nose up, viewed from above) v > 0 lands on the image's left.

import { N_LEDS } from "./protocol.js";
import { DecodedState, ViewModel } from "./viewmodel.js";

export interface ProjectionTable {
    n: number;
    uv: [number, number][];
}

// The subset of CanvasRenderingContext2D we use; tests substitute a recorder.
export interface Ctx2D {
    fillStyle: string | CanvasGradient | CanvasPattern;
    strokeStyle: string | CanvasGradient | CanvasPattern;
    lineWidth: number;
    font: string;
    textAlign: CanvasTextAlign;
    beginPath(): void;
    arc(x: number, y: number, r: number, a0: number, a1: number): void;
    moveTo(x: number, y: number): void;
    lineTo(x: number, y: number): void;
    closePath(): void;
    fill(): void;
    stroke(): void;
    fillRect(x: number, y: number, w: number, h: number): void;
    fillText(text: string, x: number, y: number): void;
}

const MAX_RADIUS = Math.PI / 2; // edge of the hemisphere in projection units

export interface Layout {
    cx: number;
    cy: number;
    scale: number;  // projection units -> pixels
    ledRadius: number;
}

export function scalpLayout(size: number): Layout {
    const margin = 0.12 * size;
    const scale = (size / 2 - margin) / MAX_RADIUS;
    return { cx: size / 2, cy: size / 2, scale, ledRadius: 0.016 * size };
}

/** Screen position of one LED: nose (+u) up, subject's left (+v) on image left. */
export function ledScreenPosition(uv: [number, number], layout: Layout): [number, number] {
    const [u, v] = uv;
    return [layout.cx - v * layout.scale, layout.cy - u * layout.scale];
}

export function drawScalp(ctx: Ctx2D, state: DecodedState | null,
                          table: ProjectionTable, size: number): void {
    const layout = scalpLayout(size);
    ctx.fillStyle = "#101014";
    ctx.fillRect(0, 0, size, size);

    // head outline + nose marker at +u
    const rim = MAX_RADIUS * layout.scale;
    ctx.strokeStyle = "#555";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(layout.cx, layout.cy, rim, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(layout.cx - 0.04 * size, layout.cy - rim);
    ctx.lineTo(layout.cx, layout.cy - rim - 0.05 * size);
    ctx.lineTo(layout.cx + 0.04 * size, layout.cy - rim);
    ctx.closePath();
    ctx.stroke();

    ctx.fillStyle = "#888";
    ctx.font = `${Math.round(0.04 * size)}px sans-serif`;
    ctx.textAlign = "center";
    ctx.fillText("L", layout.cx - rim - 0.05 * size, layout.cy);
    ctx.fillText("R", layout.cx + rim + 0.05 * size, layout.cy);

    for (let i = 0; i < table.n; i++) {
        const [x, y] = ledScreenPosition(table.uv[i], layout);
        let color = "#26262c";
        if (state !== null) {
            const r = state.leds[3 * i];
            const g = state.leds[3 * i + 1];
            const b = state.leds[3 * i + 2];
            if (r || g || b) color = `rgb(${r},${g},${b})`;
        }
        ctx.fillStyle = color;
        ctx.beginPath();
        ctx.arc(x, y, layout.ledRadius, 0, 2 * Math.PI);
        ctx.fill();
    }
}

export const LIMB_LABELS = ["left hand", "right hand", "left foot", "right foot"];
const SERVO_MAX_DEG = 60; // full raise

/** 0..1 raise fraction for a limb indicator bar. */
export function limbRaiseFraction(servoDeg: number): number {
    return Math.max(0, Math.min(1, servoDeg / SERVO_MAX_DEG));
}

export function drawLimbs(ctx: Ctx2D, servos: number[] | null,
                          x: number, y: number, w: number, h: number): void {
    const barW = w / 4 * 0.6;
    const gap = w / 4;
    ctx.font = `${Math.round(h * 0.11)}px sans-serif`;
    ctx.textAlign = "center";
    for (let i = 0; i < 4; i++) {
        const bx = x + i * gap + (gap - barW) / 2;
        ctx.fillStyle = "#26262c";
        ctx.fillRect(bx, y, barW, h * 0.8);
        const frac = servos ? limbRaiseFraction(servos[i]) : 0;
        const rise = frac * h * 0.8;
        ctx.fillStyle = "#4caf50";
        ctx.fillRect(bx, y + h * 0.8 - rise, barW, rise);
        ctx.fillStyle = "#888";
        ctx.fillText(LIMB_LABELS[i], bx + barW / 2, y + h * 0.97);
    }
}

export function drawEyes(ctx: Ctx2D, eyes: "open" | "closed" | null,
                         x: number, y: number, w: number): void {
    const r = w * 0.14;
    for (const ex of [x + w * 0.3, x + w * 0.7]) {
        ctx.strokeStyle = "#ddd";
        ctx.lineWidth = 2;
        if (eyes === "closed") {
            ctx.beginPath();
            ctx.moveTo(ex - r, y);
            ctx.lineTo(ex + r, y);
            ctx.stroke();
        } else {
            ctx.beginPath();
            ctx.arc(ex, y, r, 0, 2 * Math.PI);
            ctx.stroke();
            ctx.fillStyle = "#ddd";
            ctx.beginPath();
            ctx.arc(ex, y, r * 0.35, 0, 2 * Math.PI);
            ctx.fill();
        }
    }
}

export function drawFrame(ctx: Ctx2D, vm: ViewModel, table: ProjectionTable,
                          size: number): void {
    if (table.n !== N_LEDS || table.uv.length !== N_LEDS) {
        throw new Error(`projection table has ${table.uv.length} entries, expected ${N_LEDS}`);
    }
    drawScalp(ctx, vm.state, table, size);
    drawEyes(ctx, vm.state ? vm.state.eyes : null,
             size * 0.02, size * 0.07, size * 0.16);
    drawLimbs(ctx, vm.state ? vm.state.servos : null,
              0, size * 0.86, size, size * 0.14);
}
