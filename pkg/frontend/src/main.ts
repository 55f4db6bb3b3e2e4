import { BridgeConnection } from "./connection.js";
import { ProjectionTable, drawFrame } from "./render.js";
import { Mode, PuppetAction, puppetActionCommand, setModeCommand } from "./protocol.js";
import {
    ViewModel, initialViewModel, modeToggleEnabled, onCommandSent,
    onConnectionChange, onMessage, puppetControlsEnabled,
} from "./viewmodel.js";

const CANVAS_SIZE = 480;

const PUPPET_BUTTONS: [PuppetAction, string][] = [
    ["move_left_hand", "Move left hand"],
    ["move_right_hand", "Move right hand"],
    ["move_feet", "Move feet"],
    ["close_eyes", "Close eyes"],
    ["open_eyes", "Open eyes"],
    ["release", "Release"],
];

function bridgeUrl(): string {
    const params = new URLSearchParams(window.location.search);
    return params.get("bridge") ?? "ws://127.0.0.1:8765";
}

async function loadProjection(): Promise<ProjectionTable> {
    const resp = await fetch("assets/lattice_projection.json");
    if (!resp.ok) throw new Error(`projection table: HTTP ${resp.status}`);
    return await resp.json();
}

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

async function start() {
    const table = await loadProjection();
    const canvas = el<HTMLCanvasElement>("scalp");
    canvas.width = CANVAS_SIZE;
    canvas.height = CANVAS_SIZE;
    const ctx = canvas.getContext("2d")!;
    const statusEl = el<HTMLSpanElement>("status");
    const modeEl = el<HTMLSpanElement>("mode");
    const mentalEl = el<HTMLSpanElement>("mental");
    const errorEl = el<HTMLDivElement>("error");
    const badgeEl = el<HTMLSpanElement>("badge");
    const modeButton = el<HTMLButtonElement>("toggle-mode");
    const controls = el<HTMLDivElement>("puppet-controls");

    let vm: ViewModel = initialViewModel();

    const conn = new BridgeConnection(bridgeUrl());
    conn.onStatus = (open) => {
        vm = onConnectionChange(vm, open ? "open" : "closed");
    };

    const buttons: HTMLButtonElement[] = [];
    for (const [action, label] of PUPPET_BUTTONS) {
        const button = document.createElement("button");
        button.textContent = label;
        button.onclick = () => {
            const cmd = puppetActionCommand(action);
            if (conn.send(cmd)) vm = onCommandSent(vm, cmd);
        };
        controls.appendChild(button);
        buttons.push(button);
    }
    modeButton.onclick = () => {
        const next: Mode = vm.state?.mode === "puppet" ? "avatar" : "puppet";
        const cmd = setModeCommand(next);
        if (conn.send(cmd)) vm = onCommandSent(vm, cmd);
    };

    function frame() {
        for (const line of conn.takeLines()) vm = onMessage(vm, line);
        statusEl.textContent = vm.connection;
        statusEl.className = vm.connection;
        modeEl.textContent = vm.state ? vm.state.mode : "—";
        mentalEl.textContent = vm.state
            ? `${vm.state.mental} / eyes ${vm.state.eyes}` : "—";
        errorEl.textContent = vm.inlineError ?? "";
        badgeEl.textContent = vm.badge ? `frame skipped: ${vm.badge}` : "";
        const puppetOk = puppetControlsEnabled(vm);
        for (const b of buttons) b.disabled = !puppetOk;
        modeButton.disabled = !modeToggleEnabled(vm);
        modeButton.textContent = vm.state?.mode === "puppet"
            ? "Switch to avatar mode" : "Switch to puppet mode";
        drawFrame(ctx, vm, table, CANVAS_SIZE);
        requestAnimationFrame(frame);
    }

    conn.start();
    requestAnimationFrame(frame);
}

start().catch((e) => {
    document.body.textContent = `failed to start: ${e}`;
});
