"""Bit-exact host-to-puppet wire codec and the UDP puppet emulator.

Frame layout (little-endian, 1242 bytes total):
  magic 'TG' | version u8 | flags u8 | seq u32 | 4x servo u16 (0.1 deg)
  | 2x8 eye bytes (row-major, MSB = leftmost column) | 402x3 LED bytes
  | CRC-32 over all preceding bytes
"""

from __future__ import annotations

import socket
import struct
import threading
import zlib
from dataclasses import dataclass

import numpy as np

MAGIC = b"TG"
VERSION = 1
N_LEDS = 402
LED_BYTES = N_LEDS * 3
FRAME_LEN = 2 + 1 + 1 + 4 + 8 + 16 + LED_BYTES + 4  # 1242
DEFAULT_PORT = 5454

FLAG_MODE_PUPPET = 0x01
FLAG_EYES_CLOSED = 0x02
_RESERVED_FLAGS = 0xFC

_HEAD = struct.Struct("<2sBBI4H")

SEQ_HALF_RANGE = 1 << 31


class ProtocolError(ValueError):
    """Base for all decode failures; message names the failing field."""


class TruncationError(ProtocolError):
    pass


class BadMagicError(ProtocolError):
    pass


class UnsupportedVersionError(ProtocolError):
    pass


class IntegrityError(ProtocolError):
    pass


class ValidationError(ProtocolError):
    pass


@dataclass(frozen=True)
class PuppetFrame:
    seq: int
    puppet_mode: bool
    eyes_closed: bool
    servo_angles_deg: tuple  # 4 floats, 0.1 degree resolution
    eye_bitmaps: bytes  # 16 bytes, left then right, row-major
    led_rgb: bytes  # 1206 bytes


def pack_eye_bitmap(matrix: np.ndarray) -> bytes:
    """8x8 boolean matrix to 8 row bytes, MSB = leftmost column."""
    m = np.asarray(matrix, dtype=bool)
    if m.shape != (8, 8):
        raise ValueError("eye bitmap must be 8x8")
    return bytes(int("".join("1" if b else "0" for b in row), 2) for row in m)


def unpack_eye_bitmap(data: bytes) -> np.ndarray:
    if len(data) != 8:
        raise ValueError("eye bitmap must be 8 bytes")
    return np.array([[(byte >> (7 - c)) & 1 == 1 for c in range(8)]
                     for byte in data], dtype=bool)


def encode_frame(seq: int, puppet_mode: bool, eyes_closed: bool,
                 servo_angles_deg, eye_bitmaps: bytes, led_rgb: bytes) -> bytes:
    """Build one wire frame; raises ValueError on out-of-range fields."""
    angles = [float(a) for a in servo_angles_deg]
    if len(angles) != 4:
        raise ValueError("expected 4 servo angles")
    words = []
    for a in angles:
        w = int(round(a * 10.0))
        if not 0 <= w <= 3000:
            raise ValueError("servo angle %g deg out of range [0, 300]" % a)
        words.append(w)
    if len(eye_bitmaps) != 16:
        raise ValueError("eye bitmaps must be 16 bytes")
    if len(led_rgb) != LED_BYTES:
        raise ValueError("led payload must be %d bytes" % LED_BYTES)
    flags = (FLAG_MODE_PUPPET if puppet_mode else 0) | \
            (FLAG_EYES_CLOSED if eyes_closed else 0)
    body = _HEAD.pack(MAGIC, VERSION, flags, seq & 0xFFFFFFFF, *words) \
        + bytes(eye_bitmaps) + bytes(led_rgb)
    return body + struct.pack("<I", zlib.crc32(body))


def encode_snapshot(snapshot, seq: int) -> bytes:
    """Encode an AvatarSnapshot (from avatar.step) as a wire frame."""
    from .avatar import Mode, eye_bitmaps
    left, right = eye_bitmaps(snapshot.eyes_closed)
    return encode_frame(
        seq,
        snapshot.mode == Mode.PUPPET,
        snapshot.eyes_closed,
        snapshot.servo_angles,
        pack_eye_bitmap(left) + pack_eye_bitmap(right),
        snapshot.led_colors.astype(np.uint8).tobytes())


def decode_frame(data: bytes) -> PuppetFrame:
    """Validate and parse one wire frame; never reads past the buffer."""
    if len(data) != FRAME_LEN:
        raise TruncationError("length: expected %d bytes, got %d"
                              % (FRAME_LEN, len(data)))
    if data[0:2] != MAGIC:
        raise BadMagicError("magic: expected 'TG'")
    version = data[2]
    if version != VERSION:
        raise UnsupportedVersionError("version: unsupported %d" % version)
    crc = struct.unpack_from("<I", data, FRAME_LEN - 4)[0]
    if crc != zlib.crc32(data[:FRAME_LEN - 4]):
        raise IntegrityError("crc: mismatch")
    _, _, flags, seq, s0, s1, s2, s3 = _HEAD.unpack_from(data, 0)
    if flags & _RESERVED_FLAGS:
        raise ValidationError("flags: reserved bits set")
    words = (s0, s1, s2, s3)
    for i, w in enumerate(words):
        if w > 3000:
            raise ValidationError("servo[%d]: encoding %d exceeds 3000" % (i, w))
    off = _HEAD.size
    return PuppetFrame(
        seq=seq,
        puppet_mode=bool(flags & FLAG_MODE_PUPPET),
        eyes_closed=bool(flags & FLAG_EYES_CLOSED),
        servo_angles_deg=tuple(w / 10.0 for w in words),
        eye_bitmaps=data[off:off + 16],
        led_rgb=data[off + 16:off + 16 + LED_BYTES])


def seq_newer(seq: int, last: int) -> bool:
    """True when seq is ahead of last within a half-range modulo-2^32 window."""
    return 0 < ((seq - last) & 0xFFFFFFFF) < SEQ_HALF_RANGE


class PuppetEmulator:
    """Software stand-in for the puppet's embedded receiver.

    Last-writer-wins: each accepted frame replaces the displayed state.
    Stale/duplicate sequence numbers and undecodable datagrams leave the
    display untouched and bump counters.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.frame = None
        self.last_seq = None
        self.received = 0
        self.dropped = 0
        self.errors = 0
        self.last_update = None

    def ingest(self, datagram: bytes, now: float | None = None):
        try:
            frame = decode_frame(datagram)
        except ProtocolError:
            with self._lock:
                self.errors += 1
            return
        with self._lock:
            if self.last_seq is not None and not seq_newer(frame.seq, self.last_seq):
                self.dropped += 1
                return
            self.frame = frame
            self.last_seq = frame.seq
            self.received += 1
            self.last_update = now

    def snapshot(self):
        with self._lock:
            return self.frame, self.last_seq, self.received, self.dropped, self.errors


class PuppetSender:
    """Fire-and-forget UDP sender, one frame per datagram."""

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
        self.addr = (host, port)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, frame: bytes):
        self.sock.sendto(frame, self.addr)

    def close(self):
        self.sock.close()


def serve_emulator(emulator: PuppetEmulator, host: str, port: int,
                   stop: threading.Event):
    """Blocking UDP receive loop feeding the emulator until stop is set."""
    import time
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    sock.settimeout(0.2)
    try:
        while not stop.is_set():
            try:
                data, _ = sock.recvfrom(4096)
            except socket.timeout:
                continue
            emulator.ingest(data, now=time.monotonic())
    finally:
        sock.close()
