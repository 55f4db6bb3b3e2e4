"""Timestamped multichannel EEG sample streams.

Two sources: a scripted synthetic generator (pink background plus scripted
alpha/mu rhythms with spatial leakage) and a CSV replay source. Both emit
immutable SampleChunk messages.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Montage, geodesic_matrix

EVENT_KINDS = ("eyes_closed", "eyes_open", "move_left_hand",
               "move_right_hand", "move_feet", "rest")
MOVEMENT_KINDS = ("move_left_hand", "move_right_hand", "move_feet")

#: movement kind -> contralateral focal electrode
MOVEMENT_FOCUS = {"move_left_hand": "C4",
                  "move_right_hand": "C3",
                  "move_feet": "Cz"}


@dataclass(frozen=True)
class ScenarioEvent:
    t: float
    kind: str
    duration: float | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError("unknown event kind %r" % self.kind)
        if self.t < 0:
            raise ValueError("event time must be >= 0")
        if self.kind in MOVEMENT_KINDS:
            if self.duration is None or self.duration <= 0:
                raise ValueError("%s requires a positive duration" % self.kind)


@dataclass(frozen=True)
class SampleChunk:
    """One block of channel-major samples in microvolts."""

    start_time: float
    sample_rate: float
    channels: tuple
    samples: np.ndarray  # shape (n_channels, chunk_len)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] != len(self.channels) or s.shape[1] < 1:
            raise ValueError("samples must be (n_channels, L>=1)")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def length(self):
        return self.samples.shape[1]

    @property
    def end_time(self):
        return self.start_time + self.length / self.sample_rate


@dataclass(frozen=True)
class SynthConfig:
    """Amplitude model for the scripted generator (all in microvolts)."""

    noise_rms: float = 10.0
    rhythm_hz: float = 10.0
    alpha_open: float = 5.0
    alpha_closed: float = 20.0
    mu_rest: float = 10.0
    mu_active: float = 3.0
    mu_rebound: float = 15.0
    rebound_s: float = 1.0
    leak_lambda: float = 0.5  # radians of geodesic distance per e-fold


def parse_scenario(text: str):
    """Parse a JSON Lines scenario document into sorted ScenarioEvents."""
    events = []
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError("scenario line %d: invalid JSON (%s)" % (ln, e))
        try:
            events.append(ScenarioEvent(float(obj["t"]), obj["kind"],
                                        obj.get("duration")))
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError("scenario line %d: %s" % (ln, e))
    if any(a.t > b.t for a, b in zip(events, events[1:])):
        raise ValueError("scenario events must be sorted by t")
    return events


def pink_noise(seed, n_samples: int, sample_rate: float, rms: float = 1.0) -> np.ndarray:
    """Deterministic 1/f (pink) noise, zero-mean, scaled to the given RMS.

    Spectral shaping in the frequency domain gives a -1 log-log PSD slope
    in expectation across the whole band.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    n_freq = n_samples // 2 + 1
    spec = rng.standard_normal(n_freq) + 1j * rng.standard_normal(n_freq)
    freqs = np.fft.rfftfreq(n_samples, 1.0 / sample_rate)
    scale = np.zeros(n_freq)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    x = np.fft.irfft(spec * scale, n_samples)
    x -= x.mean()
    cur = math.sqrt(float(np.mean(x * x)))
    if cur > 0:
        x *= rms / cur
    return x


def _validate_scenario(scenario):
    ts = [e.t for e in scenario]
    if any(a > b for a, b in zip(ts, ts[1:])):
        raise ValueError("scenario events must be sorted by t")


class _Rhythm:
    """One spatial rhythm: a focal electrode, a phase, and an amplitude
    envelope sampled on the output grid."""

    def __init__(self, focal_label, phase, envelope):
        self.focal_label = focal_label
        self.phase = phase
        self.envelope = envelope  # (n_samples,)


def _build_rhythms(scenario, t, cfg: SynthConfig):
    n = len(t)
    # occipital alpha: amplitude switches with eye state
    alpha_env = np.full(n, cfg.alpha_open)
    closed_since = None
    for ev in scenario:
        if ev.kind == "eyes_closed":
            closed_since = ev.t
        elif ev.kind == "eyes_open" and closed_since is not None:
            alpha_env[(t >= closed_since) & (t < ev.t)] = cfg.alpha_closed
            closed_since = None
    if closed_since is not None:
        alpha_env[t >= closed_since] = cfg.alpha_closed

    # central mu: focal drop during movement, rebound afterwards
    mu_env = {lab: np.full(n, cfg.mu_rest) for lab in ("C3", "C4", "Cz")}
    for ev in scenario:
        if ev.kind in MOVEMENT_KINDS:
            env = mu_env[MOVEMENT_FOCUS[ev.kind]]
            end = ev.t + ev.duration
            env[(t >= ev.t) & (t < end)] = cfg.mu_active
            env[(t >= end) & (t < end + cfg.rebound_s)] = cfg.mu_rebound

    # mirror-symmetric pairs share a phase; Cz sits in quadrature so that
    # leakage sums are not fully coherent
    return [
        _Rhythm("O1", 0.25 * math.pi, alpha_env),
        _Rhythm("O2", 0.25 * math.pi, alpha_env),
        _Rhythm("C3", 0.0, mu_env["C3"]),
        _Rhythm("C4", 0.0, mu_env["C4"]),
        _Rhythm("Cz", 0.5 * math.pi, mu_env["Cz"]),
    ]


def synthesize(scenario, montage: Montage, sample_rate: float, duration: float,
               chunk_len: int, seed: int = 0, cfg: SynthConfig = SynthConfig()):
    """Yield SampleChunks of the scripted synthetic EEG stream.

    Deterministic for a given (scenario, montage, sample_rate, duration,
    seed, cfg); chunking never changes the underlying signal.
    """
    if not 128 <= sample_rate <= 1024:
        raise ValueError("sample_rate must be in [128, 1024] Hz")
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    montage.require()
    _validate_scenario(scenario)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    rhythms = _build_rhythms(scenario, t, cfg)

    data = np.empty((len(montage), n))
    for i in range(len(montage)):
        # per-row noise seed keeps mirrored montages channel-wise comparable
        data[i] = pink_noise([seed, i], n, sample_rate, rms=cfg.noise_rms)
    omega = 2.0 * math.pi * cfg.rhythm_hz
    for r in rhythms:
        carrier = r.envelope * np.sin(omega * t + r.phase)
        d = geodesic_matrix(montage.positions,
                            montage.position(r.focal_label)[None, :])[:, 0]
        gains = np.exp(-d / cfg.leak_lambda)
        data += gains[:, None] * carrier[None, :]

    for start in range(0, n, chunk_len):
        block = data[:, start:start + chunk_len]
        if block.shape[1] == 0:
            break
        yield SampleChunk(start / sample_rate, sample_rate, montage.labels, block)


def write_csv(chunks, fh):
    """Write a chunk stream as the recording CSV (t plus one column per channel)."""
    writer = None
    for chunk in chunks:
        if writer is None:
            writer = csv.writer(fh)
            writer.writerow(["t"] + list(chunk.channels))
        times = chunk.start_time + np.arange(chunk.length) / chunk.sample_rate
        for j in range(chunk.length):
            writer.writerow(["%.8f" % times[j]]
                            + ["%.8f" % v for v in chunk.samples[:, j]])


def replay_csv(text: str, chunk_len: int):
    """Replay a recording CSV as SampleChunks of chunk_len samples.

    The sample rate is inferred from the median timestamp delta; the time
    column must be strictly monotone.
    """
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or not rows[0] or rows[0][0].strip().lower() != "t":
        raise ValueError("line 1: expected header 't,<label>,...'")
    channels = tuple(c.strip() for c in rows[0][1:])
    if not channels:
        raise ValueError("line 1: no channel columns")
    width = len(rows[0])
    times, values = [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            raise ValueError("line %d: expected %d fields, got %d"
                             % (ln, width, len(row)))
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise ValueError("line %d: non-numeric value" % ln)
        if times and vals[0] <= times[-1]:
            raise ValueError("line %d: non-monotone time column" % ln)
        times.append(vals[0])
        values.append(vals[1:])
    if len(times) < 2:
        raise ValueError("recording needs at least 2 samples")
    times = np.array(times)
    data = np.array(values).T  # channel-major
    fs = 1.0 / float(np.median(np.diff(times)))

    def gen():
        n = data.shape[1]
        for start in range(0, n, chunk_len):
            block = data[:, start:start + chunk_len]
            yield SampleChunk(times[start], fs, channels, block)

    return gen()
