// One WebSocket to the host bridge with reconnect backoff. Incoming
// messages land in a latest-value slot so rendering never falls behind a
// 30 Hz state stream (client-side coalescing mirrors the server's).

export interface SocketLike {
    send(data: string): void;
    close(): void;
    onopen: ((ev?: unknown) => void) | null;
    onclose: ((ev?: unknown) => void) | null;
    onerror: ((ev?: unknown) => void) | null;
    onmessage: ((ev: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const BACKOFF_INITIAL_MS = 500;
const BACKOFF_MAX_MS = 5000;

export class BridgeConnection {
    private socket: SocketLike | null = null;
    private latest: string | null = null;
    private backoffMs = BACKOFF_INITIAL_MS;
    private stopped = false;
    private timer: ReturnType<typeof setTimeout> | null = null;

    onStatus: (open: boolean) => void = () => { };

    constructor(private url: string,
                private factory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike) { }

    start(): void {
        this.stopped = false;
        this.open();
    }

    private open(): void {
        const ws = this.factory(this.url);
        this.socket = ws;
        ws.onopen = () => {
            this.backoffMs = BACKOFF_INITIAL_MS;
            this.onStatus(true);
        };
        ws.onmessage = (ev) => {
            // a frame may carry several newline-delimited messages; only the
            // last state matters, but error replies must not be swallowed,
            // so the consumer drains line by line
            this.latest = this.latest === null
                ? String(ev.data)
                : this.latest + String(ev.data);
        };
        ws.onerror = () => { };
        ws.onclose = () => {
            this.onStatus(false);
            this.socket = null;
            if (!this.stopped) {
                this.timer = setTimeout(() => this.open(), this.backoffMs);
                this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
            }
        };
    }

    /** All buffered lines since the last call, oldest first. */
    takeLines(): string[] {
        if (this.latest === null) return [];
        const text = this.latest;
        this.latest = null;
        return text.split("\n").filter((line) => line.length > 0);
    }

    send(command: string): boolean {
        if (this.socket === null) return false;
        try {
            this.socket.send(command);
            return true;
        } catch {
            return false;
        }
    }

    stop(): void {
        this.stopped = true;
        if (this.timer !== null) clearTimeout(this.timer);
        if (this.socket !== null) this.socket.close();
    }
}
