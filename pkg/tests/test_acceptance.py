"""End-to-end acceptance suite. Each test prints one pass/fail line so the
run doubles as a checklist; the per-test assertions carry the tolerances.
"""

import contextlib
import json
import time

import numpy as np
import pytest

from conftest import FIXTURE_SCENARIO, write_scenario
from eegavatar import protocol
from eegavatar.avatar import PuppetAction, puppet_pattern
from eegavatar.dsp import StreamingBandpass, BandSpec, band_power, compute_erd
from eegavatar.geometry import (Montage, geodesic_matrix, generate_lattice,
                                mirror_lr)
from eegavatar.orchestrator import Pipeline, RunConfig, run
from eegavatar.sources import ScenarioEvent, synthesize
from eegavatar.topomap import Topomapper, interpolate

FS = 512.0


@contextlib.contextmanager
def criterion(capsys, number, label):
    try:
        yield
    except Exception:
        with capsys.disabled():
            print("criterion %d (%s): FAIL" % (number, label))
        raise
    with capsys.disabled():
        print("criterion %d (%s): PASS" % (number, label))


def fixture_config(tmp_path, name="log.jsonl"):
    scen = write_scenario(tmp_path / "fixture.jsonl", FIXTURE_SCENARIO)
    return RunConfig(scenario_path=scen, duration=12.0, seed=1,
                     sample_rate=FS, montage="standard32", offline=True,
                     log_path=str(tmp_path / name))


@pytest.fixture(scope="module")
def fixture_run(tmp_path_factory):
    """One offline run of the 12 s fixture scenario, shared by criteria 1/2/6."""
    tmp = tmp_path_factory.mktemp("acceptance")
    cfg = fixture_config(tmp)
    t0 = time.perf_counter()
    result = run(cfg)
    wall = time.perf_counter() - t0
    with open(cfg.log_path) as fh:
        records = [json.loads(line) for line in fh]
    return cfg, result, records, wall


def test_criterion_1_scenario_fidelity(fixture_run, montage32, capsys):
    cfg, result, records, wall = fixture_run
    with criterion(capsys, 1, "scenario fidelity"):
        c3, c4 = montage32.index("C3"), montage32.index("C4")
        closed = [r["t"] for r in records if r["eyes"] == "closed"]
        opened = [r["t"] for r in records if r["eyes"] == "open" and r["t"] > 3.0]
        assert 2.0 <= min(closed) <= 3.5
        assert 4.0 <= min(opened) <= 5.5
        left = [r for r in records if r["mental"] == "left_hand"]
        assert left and min(r["t"] for r in left) <= 7.5
        assert max(r["t"] for r in left) >= 5.0
        peak_l = min(left, key=lambda r: r["erd"][c4])
        assert int(np.argmin(peak_l["erd"])) == c4
        right = [r for r in records if r["mental"] == "right_hand"]
        assert right and min(r["t"] for r in right) <= 10.5
        assert max(r["t"] for r in right) >= 8.0
        peak_r = min(right, key=lambda r: r["erd"][c3])
        assert int(np.argmin(peak_r["erd"])) == c3
        # post-movement rebound at the focal electrode
        left_end = max(r["t"] for r in left)
        right_end = max(r["t"] for r in right)
        assert max(r["erd"][c4] for r in records
                   if left_end < r["t"] <= left_end + 2.0) > 0.0
        assert max(r["erd"][c3] for r in records
                   if right_end < r["t"] <= right_end + 2.0) > 0.0
        assert wall < 5.0


def test_criterion_2_contralateral_display(fixture_run, montage32, lattice402,
                                           capsys):
    cfg, result, records, wall = fixture_run
    with criterion(capsys, 2, "contralateral display"):
        mapper = Topomapper(montage32, lattice402, cfg.topomap)
        for motor, focal in (("left_hand", "C4"), ("right_hand", "C3")):
            idx = montage32.index(focal)
            active = [r for r in records if r["mental"] == motor]
            peak = min(active, key=lambda r: r["erd"][idx])
            _, colors = mapper.colors(np.array(peak["erd"]))
            led = int(np.argmax(colors[:, 0]))
            d = geodesic_matrix(lattice402[led][None, :],
                                montage32.position(focal)[None, :])[0, 0]
            assert d <= 0.35
            if focal == "C4":
                assert lattice402[led, 1] < 0
            else:
                assert lattice402[led, 1] > 0
        left = puppet_pattern(PuppetAction.MOVE_LEFT_HAND, montage32)
        right = puppet_pattern(PuppetAction.MOVE_RIGHT_HAND, montage32)
        field_left = interpolate(left, montage32, lattice402)
        field_right = interpolate(right, montage32, mirror_lr(lattice402))
        assert np.max(np.abs(field_left - field_right)) <= 1e-6


def test_criterion_3_dsp_numerics(montage32, capsys):
    with criterion(capsys, 3, "dsp numerics"):
        t = np.arange(int(FS)) / FS
        sine = np.sin(2 * np.pi * 10.0 * t)
        assert band_power(sine) == pytest.approx(0.5, rel=0.05)

        def measured_gain(freq):
            bp = StreamingBandpass(BandSpec(8.0, 12.0, "mu"), FS, 1)
            tt = np.arange(int(10 * FS)) / FS
            x = np.sin(2 * np.pi * freq * tt)[None, :]
            y = bp.process(x)[0]
            tail = slice(int(5 * FS), None)
            return np.sqrt(np.mean(y[tail] ** 2) / np.mean(x[0, tail] ** 2))

        assert measured_gain(10.0) >= 0.9
        assert measured_gain(2.0) <= 0.1
        assert measured_gain(40.0) <= 0.1

        values, valid = compute_erd(np.array([4.5]), np.array([50.0]))
        assert valid[0]
        assert abs(values[0] - (-91.0)) <= 1e-9

        scenario = [ScenarioEvent(2.0, "move_left_hand", 1.0)]

        def frames(chunk_len):
            pipeline = Pipeline(RunConfig(sample_rate=FS), montage32)
            out = []
            for c in synthesize(scenario, montage32, FS, 5.0, chunk_len, seed=7):
                out.extend(pipeline.push(c))
            return out

        small, big = frames(32), frames(512)
        assert len(small) == len(big)
        for a, b in zip(small, big):
            assert a.t == b.t
            assert np.max(np.abs(a.erd_values - b.erd_values)) <= 1e-6


def test_criterion_4_interpolation_properties(montage32, capsys):
    with criterion(capsys, 4, "interpolation properties"):
        rng = np.random.default_rng(42)
        n_cases = 1000
        q = rng.standard_normal((n_cases, 3))
        q[:, 2] = np.abs(q[:, 2])
        q /= np.linalg.norm(q, axis=1, keepdims=True)

        const = interpolate(np.full(32, 13.7), montage32, q)
        assert np.max(np.abs(const - 13.7)) <= 1e-9

        values = rng.uniform(-100, 100, (n_cases, 32))
        picks = rng.integers(0, 32, n_cases)
        for i in range(n_cases):
            at = montage32.positions[picks[i]][None, :]
            out = interpolate(values[i], montage32, at)
            assert out[0] == values[i, picks[i]]

        for i in range(0, n_cases, 100):
            out = interpolate(values[i], montage32, q)
            assert np.all(out >= values[i].min() - 1e-9)
            assert np.all(out <= values[i].max() + 1e-9)

        mirrored = Montage("m", montage32.labels, mirror_lr(montage32.positions))
        for i in range(0, n_cases, 100):
            direct = interpolate(values[i], montage32, q)
            flipped = interpolate(values[i], mirrored, mirror_lr(q))
            assert np.max(np.abs(direct - flipped)) <= 1e-9


def test_criterion_5_protocol(capsys):
    with criterion(capsys, 5, "protocol robustness"):
        rng = np.random.default_rng(5)

        def random_fields():
            return dict(
                seq=int(rng.integers(0, 2 ** 32)),
                puppet_mode=bool(rng.integers(2)),
                eyes_closed=bool(rng.integers(2)),
                servo_angles_deg=[float(w) / 10.0
                                  for w in rng.integers(0, 3001, 4)],
                eye_bitmaps=bytes(rng.integers(0, 256, 16, dtype=np.uint8)),
                led_rgb=bytes(rng.integers(0, 256, protocol.LED_BYTES,
                                           dtype=np.uint8)),
            )

        for _ in range(10000):
            data = protocol.encode_frame(**random_fields())
            assert len(data) == 1242
            f = protocol.decode_frame(data)
            again = protocol.encode_frame(f.seq, f.puppet_mode, f.eyes_closed,
                                          f.servo_angles_deg, f.eye_bitmaps,
                                          f.led_rgb)
            assert again == data

        for _ in range(1000):
            data = bytearray(protocol.encode_frame(**random_fields()))
            for byte in range(protocol.FRAME_LEN):
                for bit in range(8):
                    data[byte] ^= 1 << bit
                    try:
                        protocol.decode_frame(bytes(data))
                    except protocol.ProtocolError:
                        pass
                    else:
                        raise AssertionError(
                            "bit flip at byte %d bit %d accepted" % (byte, bit))
                    data[byte] ^= 1 << bit

        frames = []
        for s in range(1, 501):
            fields = random_fields()
            fields["seq"] = s
            frames.append(protocol.encode_frame(**fields))
        keep = [f for f in frames if rng.random() > 0.2]
        rng.shuffle(keep)
        emu = protocol.PuppetEmulator()
        seqs = []
        for f in keep:
            emu.ingest(f)
            seqs.append(emu.snapshot()[1])
        assert all(b >= a for a, b in zip(seqs, seqs[1:]))
        assert emu.snapshot()[4] == 0  # no decode errors on clean frames


def test_criterion_6_performance(fixture_run, tmp_path, capsys):
    cfg, result, records, wall = fixture_run
    with criterion(capsys, 6, "performance"):
        assert result.simulated_s / wall >= 5.0
        assert result.latency_percentile(99) < 10.0

        scen = write_scenario(tmp_path / "idle.jsonl", [])
        rt = RunConfig(scenario_path=scen, duration=60.0, offline=False,
                       sample_rate=FS)
        rt_result = run(rt)
        period = 1.0 / rt.tick_rate
        assert abs(rt_result.ticks - 60.0 * rt.tick_rate) <= 3
        # absolute deadlines: transient scheduler jitter must not accumulate
        assert min(rt_result.tick_drift_s[-5:]) < period


def test_criterion_7_determinism(tmp_path, capsys):
    with criterion(capsys, 7, "determinism"):
        cfg_a = fixture_config(tmp_path, "a.jsonl")
        cfg_b = fixture_config(tmp_path, "b.jsonl")
        run(cfg_a)
        run(cfg_b)
        with open(cfg_a.log_path, "rb") as fa, open(cfg_b.log_path, "rb") as fb:
            assert fa.read() == fb.read()
