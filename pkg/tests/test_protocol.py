import socket
import threading
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegavatar import protocol
from eegavatar.protocol import (FRAME_LEN, BadMagicError, IntegrityError,
                                ProtocolError, PuppetEmulator, TruncationError,
                                UnsupportedVersionError, ValidationError,
                                decode_frame, encode_frame, pack_eye_bitmap,
                                seq_newer, unpack_eye_bitmap)


def random_frame_fields(rng):
    return dict(
        seq=int(rng.integers(0, 2 ** 32)),
        puppet_mode=bool(rng.integers(2)),
        eyes_closed=bool(rng.integers(2)),
        servo_angles_deg=[float(w) / 10.0 for w in rng.integers(0, 3001, 4)],
        eye_bitmaps=bytes(rng.integers(0, 256, 16, dtype=np.uint8)),
        led_rgb=bytes(rng.integers(0, 256, protocol.LED_BYTES, dtype=np.uint8)),
    )


class TestEncode:
    def test_frame_length(self):
        rng = np.random.default_rng(0)
        assert len(encode_frame(**random_frame_fields(rng))) == 1242

    def test_neutral_header_bytes(self):
        data = encode_frame(0, False, False, [0, 0, 0, 0], bytes(16),
                            bytes(protocol.LED_BYTES))
        assert data[0:2] == b"TG"
        assert data[2] == 0x01  # version
        assert data[3] == 0x00  # flags: avatar mode, eyes open

    def test_servo_out_of_range(self):
        with pytest.raises(ValueError):
            encode_frame(0, False, False, [301.0, 0, 0, 0], bytes(16),
                         bytes(protocol.LED_BYTES))

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        fields = random_frame_fields(rng)
        frame = decode_frame(encode_frame(**fields))
        assert frame.seq == fields["seq"]
        assert frame.puppet_mode == fields["puppet_mode"]
        assert frame.eyes_closed == fields["eyes_closed"]
        assert frame.servo_angles_deg == tuple(fields["servo_angles_deg"])
        assert frame.eye_bitmaps == fields["eye_bitmaps"]
        assert frame.led_rgb == fields["led_rgb"]

    @given(st.integers(0, 2 ** 32 - 1), st.booleans(), st.booleans(),
           st.lists(st.integers(0, 3000), min_size=4, max_size=4),
           st.binary(min_size=16, max_size=16))
    @settings(max_examples=100, deadline=None)
    def test_reencode_identity(self, seq, mode, eyes, words, bitmaps):
        led = bytes((seq + i) % 256 for i in range(protocol.LED_BYTES))
        data = encode_frame(seq, mode, eyes, [w / 10.0 for w in words],
                            bitmaps, led)
        f = decode_frame(data)
        again = encode_frame(f.seq, f.puppet_mode, f.eyes_closed,
                             f.servo_angles_deg, f.eye_bitmaps, f.led_rgb)
        assert again == data


class TestDecodeErrors:
    def make(self):
        return bytearray(encode_frame(**random_frame_fields(np.random.default_rng(2))))

    def test_truncation(self):
        with pytest.raises(TruncationError):
            decode_frame(bytes(self.make()[:-1]))

    def test_bad_magic(self):
        data = self.make()
        data[0] ^= 0xFF
        with pytest.raises(BadMagicError):
            decode_frame(bytes(data))

    def test_unsupported_version(self):
        data = self.make()
        data[2] = 2
        with pytest.raises(UnsupportedVersionError):
            decode_frame(bytes(data))

    def test_crc_mismatch(self):
        data = self.make()
        data[500] ^= 0x01
        with pytest.raises(IntegrityError):
            decode_frame(bytes(data))

    def test_reserved_flags(self):
        import struct
        import zlib
        data = self.make()
        data[3] |= 0x04
        body = bytes(data[:-4])
        data[-4:] = struct.pack("<I", zlib.crc32(body))
        with pytest.raises(ValidationError):
            decode_frame(bytes(data))

    def test_every_bit_flip_rejected_sampled(self):
        # exhaustive single-bit sweep over one frame (the acceptance suite
        # covers 1000 frames)
        data = self.make()
        original = bytes(data)
        for byte in range(FRAME_LEN):
            for bit in range(8):
                data[byte] ^= 1 << bit
                with pytest.raises(ProtocolError):
                    decode_frame(bytes(data))
                data[byte] ^= 1 << bit
        assert bytes(data) == original


class TestEyeBitmaps:
    def test_pack_msb_is_left_column(self):
        m = np.zeros((8, 8), dtype=bool)
        m[0, 0] = True
        assert pack_eye_bitmap(m)[0] == 0x80

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        m = rng.integers(0, 2, (8, 8)).astype(bool)
        assert np.array_equal(unpack_eye_bitmap(pack_eye_bitmap(m)), m)


class TestSeqWindow:
    def test_basic_ordering(self):
        assert seq_newer(2, 1)
        assert not seq_newer(1, 2)
        assert not seq_newer(5, 5)

    def test_wraparound(self):
        assert seq_newer(3, 2 ** 32 - 2)
        assert not seq_newer(2 ** 32 - 2, 3)


class TestEmulator:
    def frames(self, seqs):
        rng = np.random.default_rng(4)
        out = []
        for s in seqs:
            fields = random_frame_fields(rng)
            fields["seq"] = s
            out.append(encode_frame(**fields))
        return out

    def test_in_order_delivery(self):
        emu = PuppetEmulator()
        for f in self.frames([1, 2, 3]):
            emu.ingest(f)
        frame, seq, received, dropped, errors = emu.snapshot()
        assert seq == 3 and dropped == 0 and received == 3

    def test_stale_rejected(self):
        emu = PuppetEmulator()
        for f in self.frames([1, 3, 2]):
            emu.ingest(f)
        frame, seq, received, dropped, _ = emu.snapshot()
        assert frame.seq == 3 and dropped == 1

    def test_corrupt_datagram_isolated(self):
        emu = PuppetEmulator()
        frames = self.frames([1, 2])
        emu.ingest(frames[0])
        bad = bytearray(frames[1])
        bad[100] ^= 0xFF
        emu.ingest(bytes(bad))
        emu.ingest(frames[1])
        frame, seq, received, dropped, errors = emu.snapshot()
        assert seq == 2 and errors == 1 and dropped == 0

    def test_monotone_under_reorder_and_drop(self):
        rng = np.random.default_rng(5)
        frames = self.frames(range(1, 101))
        keep = [f for f in frames if rng.random() > 0.2]
        rng.shuffle(keep)
        emu = PuppetEmulator()
        seqs = []
        for f in keep:
            emu.ingest(f)
            seqs.append(emu.snapshot()[1])
        assert all(b >= a for a, b in zip(seqs, seqs[1:]))

    def test_udp_serve_loop(self):
        emu = PuppetEmulator()
        stop = threading.Event()
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        sock.close()
        thread = threading.Thread(target=protocol.serve_emulator,
                                  args=(emu, "127.0.0.1", port, stop),
                                  daemon=True)
        thread.start()
        time.sleep(0.1)
        sender = protocol.PuppetSender("127.0.0.1", port)
        for f in self.frames([1, 2, 3]):
            sender.send(f)
        deadline = time.time() + 2.0
        while time.time() < deadline and emu.snapshot()[1] != 3:
            time.sleep(0.02)
        stop.set()
        thread.join(timeout=2)
        sender.close()
        assert emu.snapshot()[1] == 3
