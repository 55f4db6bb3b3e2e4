"""Stream DSP: causal band-pass filtering, sliding band power, baseline
tracking and signed ERD/ERS percentages, plus the amplitude artifact gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .sources import SampleChunk

ERD_CLAMP = (-100.0, 400.0)
BASELINE_EPS = 1e-9


@dataclass(frozen=True)
class BandSpec:
    low: float
    high: float
    name: str = ""

    def validate(self, sample_rate: float):
        if not 0.0 < self.low < self.high < sample_rate / 2.0:
            raise ValueError("band %s (%g-%g Hz) invalid for fs=%g Hz"
                             % (self.name or "?", self.low, self.high, sample_rate))
        return self


@dataclass(frozen=True)
class DspConfig:
    mu_band: tuple = (8.0, 12.0)
    alpha_band: tuple = (8.0, 12.0)
    window_s: float = 1.0
    baseline_tau_s: float = 30.0
    artifact_threshold_uv: float = 100.0
    filter_order: int = 4


class StreamingBandpass:
    """Causal 4th-order Butterworth band-pass (two biquad sections) whose
    state carries across chunk boundaries, so output is chunk-size neutral."""

    def __init__(self, band: BandSpec, sample_rate: float, n_channels: int,
                 order: int = 4):
        band.validate(sample_rate)
        if order % 2 != 0 or order < 2:
            raise ValueError("order must be a positive even number")
        self.band = band
        self.sample_rate = sample_rate
        self.sos = signal.butter(order // 2, [band.low, band.high],
                                 btype="bandpass", fs=sample_rate, output="sos")
        self.zi = np.zeros((self.sos.shape[0], n_channels, 2))

    def process(self, samples: np.ndarray) -> np.ndarray:
        """Filter a (n_channels, L) block in place of the stream."""
        out, self.zi = signal.sosfilt(self.sos, samples, axis=-1, zi=self.zi)
        return out


def band_power(window: np.ndarray) -> float:
    """Mean of squared samples over the window (power in uV^2)."""
    w = np.asarray(window, dtype=float)
    if w.size == 0:
        raise ValueError("empty window")
    return float(np.mean(w * w))


class SlidingPower:
    """Sliding-window mean-square power over a filtered stream.

    Emits one power vector per hop once the first full window has been
    seen. Emission points are fixed by absolute sample index, so the frame
    sequence does not depend on how the stream was chunked.
    """

    def __init__(self, sample_rate: float, n_channels: int,
                 window_s: float = 1.0, hop_rate: float = 30.0,
                 start_time: float = 0.0):
        self.fs = sample_rate
        self.window = int(round(window_s * sample_rate))
        if self.window < 1:
            raise ValueError("window too short for sample rate")
        self.hop_rate = hop_rate
        self.start_time = start_time
        self.n_seen = 0
        self.n_frames = 0
        self.buf = np.zeros((n_channels, 0))

    def _next_emit_index(self):
        return self.window + int(round(self.n_frames * self.fs / self.hop_rate))

    def push(self, samples: np.ndarray):
        """Feed a (n_channels, L) block; return a list of (t, powers)."""
        self.buf = np.concatenate([self.buf, samples], axis=1)
        self.n_seen += samples.shape[1]
        out = []
        while self._next_emit_index() <= self.n_seen:
            idx = self._next_emit_index()
            # window ends at absolute index idx; buffer tail is at n_seen
            end = self.buf.shape[1] - (self.n_seen - idx)
            w = self.buf[:, end - self.window:end]
            out.append((self.start_time + idx / self.fs, np.mean(w * w, axis=1)))
            self.n_frames += 1
        # keep only what future windows can still reach
        keep = self.window + int(self.fs)
        if self.buf.shape[1] > keep:
            self.buf = self.buf[:, -keep:]
        return out


@dataclass
class BaselineState:
    """Per-electrode exponential-moving-average reference power."""

    tau_s: float = 30.0
    powers: np.ndarray | None = None

    @property
    def initialized(self):
        return self.powers is not None

    def update(self, powers: np.ndarray, dt: float, freeze: bool = False):
        """Advance the EMA; frozen updates leave the reference untouched."""
        if freeze and self.initialized:
            return
        p = np.asarray(powers, dtype=float)
        if self.powers is None:
            self.powers = p.copy()
            return
        alpha = min(1.0, dt / self.tau_s)
        self.powers += alpha * (p - self.powers)


def compute_erd(power, baseline):
    """Signed ERD/ERS percent: 100*(P-B)/B clamped to [-100, +400].

    Returns (values, valid) arrays; entries with a degenerate baseline are
    0 with valid=False. ERD (desynchronization) is negative.
    """
    p = np.atleast_1d(np.asarray(power, dtype=float))
    b = np.atleast_1d(np.asarray(baseline, dtype=float))
    valid = b >= BASELINE_EPS
    values = np.zeros_like(p)
    np.divide(p - b, b, out=values, where=valid)
    values *= 100.0
    np.clip(values, ERD_CLAMP[0], ERD_CLAMP[1], out=values)
    values[~valid] = 0.0
    return values, valid


def artifact_gate(chunk: SampleChunk, threshold_uv: float = 100.0) -> bool:
    """True when the chunk passes (all samples finite and within threshold)."""
    if threshold_uv <= 0:
        raise ValueError("threshold must be > 0")
    s = chunk.samples
    return bool(np.all(np.isfinite(s)) and np.all(np.abs(s) <= threshold_uv))
