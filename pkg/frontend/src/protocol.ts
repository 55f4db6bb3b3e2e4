// Bridge wire format: newline-delimited JSON over a WebSocket. State
// updates carry the LED field base64-packed (402 RGB triplets = 1206 bytes).

export const N_LEDS = 402;
export const LED_BYTES = N_LEDS * 3;

export type Mode = "avatar" | "puppet";
export type Eyes = "open" | "closed";

export interface StateMessage {
    type: "state";
    seq: number;
    mode: Mode;
    mental: string;
    eyes: Eyes;
    servos: number[]; // [left hand, right hand, left foot, right foot] degrees
    leds: string;     // base64 RGB payload
}

export interface ErrorMessage {
    type: "error";
    reason: string;
}

export type BridgeMessage = StateMessage | ErrorMessage;

export class ProtocolError extends Error { }

export function parseMessage(raw: string): BridgeMessage {
    let obj: any;
    try {
        obj = JSON.parse(raw);
    } catch {
        throw new ProtocolError("not JSON");
    }
    if (obj === null || typeof obj !== "object") {
        throw new ProtocolError("not an object");
    }
    if (obj.type === "error") {
        if (typeof obj.reason !== "string") throw new ProtocolError("bad error message");
        return { type: "error", reason: obj.reason };
    }
    if (obj.type !== "state") throw new ProtocolError(`unknown type: ${obj.type}`);
    if (obj.mode !== "avatar" && obj.mode !== "puppet") throw new ProtocolError("bad mode");
    if (obj.eyes !== "open" && obj.eyes !== "closed") throw new ProtocolError("bad eyes");
    if (!Array.isArray(obj.servos) || obj.servos.length !== 4 ||
        !obj.servos.every((s: any) => typeof s === "number" && isFinite(s))) {
        throw new ProtocolError("bad servos");
    }
    if (typeof obj.seq !== "number" || typeof obj.mental !== "string" ||
        typeof obj.leds !== "string") {
        throw new ProtocolError("missing field");
    }
    return obj as StateMessage;
}

/** Decode the base64 LED payload to exactly 1206 bytes (402 RGB triplets). */
export function decodeLeds(b64: string): Uint8Array {
    let binary: string;
    try {
        binary = atob(b64);
    } catch {
        throw new ProtocolError("bad base64 LED payload");
    }
    if (binary.length !== LED_BYTES) {
        throw new ProtocolError(`LED payload is ${binary.length} bytes, expected ${LED_BYTES}`);
    }
    const out = new Uint8Array(LED_BYTES);
    for (let i = 0; i < LED_BYTES; i++) out[i] = binary.charCodeAt(i);
    return out;
}

export const PUPPET_ACTIONS = [
    "move_left_hand", "move_right_hand", "move_feet",
    "close_eyes", "open_eyes", "release",
] as const;
export type PuppetAction = typeof PUPPET_ACTIONS[number];

export function setModeCommand(mode: Mode): string {
    return JSON.stringify({ type: "set_mode", mode });
}

export function puppetActionCommand(action: PuppetAction): string {
    return JSON.stringify({ type: "puppet_action", action });
}
