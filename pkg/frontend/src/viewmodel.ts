// The UI holds no truth of its own: everything rendered comes from the
// latest state message, so a reconnect reconverges within one message.

import {
    BridgeMessage, Eyes, Mode, StateMessage, decodeLeds, parseMessage,
} from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface DecodedState {
    seq: number;
    mode: Mode;
    mental: string;
    eyes: Eyes;
    servos: number[];
    leds: Uint8Array; // 402 * 3 bytes
}

export interface ViewModel {
    connection: Connection;
    state: DecodedState | null;
    inlineError: string | null; // last error reply, shown until the next command
    badge: string | null;       // decode problem: frame skipped, badge shown
    pendingCommand: string | null;
}

export function initialViewModel(): ViewModel {
    return { connection: "connecting", state: null, inlineError: null,
             badge: null, pendingCommand: null };
}

export function onConnectionChange(vm: ViewModel, connection: Connection): ViewModel {
    return { ...vm, connection };
}

export function onCommandSent(vm: ViewModel, command: string): ViewModel {
    return { ...vm, pendingCommand: command, inlineError: null };
}

export function onMessage(vm: ViewModel, raw: string): ViewModel {
    let msg: BridgeMessage;
    try {
        msg = parseMessage(raw);
    } catch (e) {
        return { ...vm, badge: String((e as Error).message) };
    }
    if (msg.type === "error") {
        return { ...vm, inlineError: msg.reason, pendingCommand: null };
    }
    return applyState(vm, msg);
}

function applyState(vm: ViewModel, msg: StateMessage): ViewModel {
    let leds: Uint8Array;
    try {
        leds = decodeLeds(msg.leds);
    } catch (e) {
        return { ...vm, badge: String((e as Error).message) };
    }
    return {
        ...vm,
        badge: null,
        pendingCommand: null,
        state: {
            seq: msg.seq,
            mode: msg.mode,
            mental: msg.mental,
            eyes: msg.eyes,
            servos: msg.servos.slice(),
            leds,
        },
    };
}

/** Puppet controls are live only when connected and the host is in puppet mode. */
export function puppetControlsEnabled(vm: ViewModel): boolean {
    return vm.connection === "open" && vm.state !== null && vm.state.mode === "puppet";
}

export function modeToggleEnabled(vm: ViewModel): boolean {
    return vm.connection === "open" && vm.state !== null;
}
