"""Companion-UI bridge: a WebSocket endpoint speaking newline-delimited
JSON. Outbound state updates are coalesced per client (a slow client only
ever sees the latest state); inbound commands are queued for the tick loop.
"""

from __future__ import annotations

import base64
import json
import queue
import threading

from websockets.sync.server import serve

from .avatar import AvatarSnapshot, Mode, PuppetAction

VALID_MODES = {m.value for m in Mode}
VALID_ACTIONS = {a.value for a in PuppetAction}


def state_message(snapshot: AvatarSnapshot, seq: int) -> str:
    return json.dumps({
        "type": "state",
        "seq": seq,
        "mode": snapshot.mode.value,
        "mental": snapshot.mental.motor.value,
        "eyes": "closed" if snapshot.eyes_closed else "open",
        "servos": [round(float(a), 3) for a in snapshot.servo_angles],
        "leds": base64.b64encode(snapshot.led_colors.tobytes()).decode("ascii"),
    }) + "\n"


class _Client:
    def __init__(self, ws):
        self.ws = ws
        self.cond = threading.Condition()
        self.latest = None
        self.pending = []  # direct replies, never coalesced
        self.closed = False

    def offer(self, text):
        with self.cond:
            self.latest = text
            self.cond.notify()

    def reply(self, obj):
        with self.cond:
            self.pending.append(json.dumps(obj) + "\n")
            self.cond.notify()

    def close(self):
        with self.cond:
            self.closed = True
            self.cond.notify()


class UiBridge:
    """Threaded WebSocket server; publish() never blocks on clients."""

    def __init__(self, port: int, host: str = "127.0.0.1"):
        self.commands = queue.Queue()  # (client, dict)
        self._clients = set()
        self._lock = threading.Lock()
        self._server = serve(self._handler, host, port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    def _handler(self, ws):
        client = _Client(ws)
        with self._lock:
            self._clients.add(client)
        sender = threading.Thread(target=self._send_loop, args=(client,),
                                  daemon=True)
        sender.start()
        try:
            for raw in ws:
                self._on_message(client, raw)
        except Exception:
            pass
        finally:
            client.close()
            with self._lock:
                self._clients.discard(client)

    def _send_loop(self, client):
        while True:
            with client.cond:
                while not (client.closed or client.latest or client.pending):
                    client.cond.wait()
                if client.closed:
                    return
                batch, client.pending = client.pending, []
                latest, client.latest = client.latest, None
            try:
                for msg in batch:
                    client.ws.send(msg)
                if latest:
                    client.ws.send(latest)
            except Exception:
                return

    def _on_message(self, client, raw):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", "replace")
        try:
            obj = json.loads(raw)
            if not isinstance(obj, dict):
                raise ValueError
        except ValueError:
            client.reply({"type": "error", "reason": "malformed-json"})
            return
        kind = obj.get("type")
        if kind == "set_mode" and obj.get("mode") in VALID_MODES:
            self.commands.put((client, obj))
        elif kind == "puppet_action" and obj.get("action") in VALID_ACTIONS:
            self.commands.put((client, obj))
        else:
            client.reply({"type": "error", "reason": "unknown-command"})

    def publish(self, snapshot: AvatarSnapshot, seq: int):
        text = state_message(snapshot, seq)
        with self._lock:
            clients = list(self._clients)
        for c in clients:
            c.offer(text)

    def reply_error(self, client, reason: str):
        client.reply({"type": "error", "reason": reason})

    def close(self):
        with self._lock:
            clients = list(self._clients)
        for c in clients:
            c.close()
            try:
                c.ws.close()
            except Exception:
                pass
        self._server.shutdown()
        self._thread.join(timeout=2)
