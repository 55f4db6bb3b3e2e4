"""End-to-end wiring: configuration, the DSP/classifier pipeline, the tick
loop, protocol emission, state logging and the UI bridge.
"""

from __future__ import annotations

import collections
import json
import os
import threading
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import dsp, sources
from .avatar import Avatar, AvatarConfig, InvalidStateError, Mode, PuppetAction
from .classifier import ClassifierConfig, MentalState, Motor, StateClassifier
from .dsp import (BandSpec, BaselineState, DspConfig, SlidingPower,
                  StreamingBandpass, artifact_gate, compute_erd)
from .geometry import (Montage, builtin_montage, generate_lattice,
                       load_montage_file)
from .protocol import PuppetSender, encode_snapshot
from .sources import SynthConfig, parse_scenario, replay_csv, synthesize
from .topomap import Topomapper, TopomapConfig

N_LEDS = 402


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending field."""


def _apply_overrides(default, overrides: dict, section: str):
    if not overrides:
        return default
    valid = {f.name for f in fields(default)}
    bad = set(overrides) - valid
    if bad:
        raise ConfigError("%s: unknown option(s) %s" % (section, ", ".join(sorted(bad))))
    coerced = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
    try:
        return replace(default, **coerced)
    except (TypeError, ValueError) as e:
        raise ConfigError("%s: %s" % (section, e))


@dataclass
class RunConfig:
    scenario_path: str | None = None
    replay_path: str | None = None
    montage: str = "standard32"
    sample_rate: float = 512.0
    duration: float | None = None
    seed: int = 0
    chunk_len: int = 64
    tick_rate: float = 30.0
    mode: Mode = Mode.AVATAR
    offline: bool = False
    log_path: str | None = None
    puppet_host: str | None = None
    puppet_port: int = 5454
    bridge_port: int | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    dsp: DspConfig = field(default_factory=DspConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    topomap: TopomapConfig = field(default_factory=TopomapConfig)
    avatar: AvatarConfig = field(default_factory=AvatarConfig)

    def validate(self):
        if (self.scenario_path is None) == (self.replay_path is None):
            raise ConfigError("source: exactly one of scenario or replay required")
        for name, path in (("source.scenario", self.scenario_path),
                           ("source.replay", self.replay_path)):
            if path is not None and not os.path.exists(path):
                raise ConfigError("%s: file not found: %s" % (name, path))
        if not 1.0 <= self.tick_rate <= 120.0:
            raise ConfigError("tick_rate: must be in [1, 120] Hz")
        if self.scenario_path is not None and not 128 <= self.sample_rate <= 1024:
            raise ConfigError("sample_rate: must be in [128, 1024] Hz")
        if self.chunk_len < 1:
            raise ConfigError("chunk_len: must be >= 1")
        return self

    def load_montage(self) -> Montage:
        if self.montage in ("standard20", "standard32"):
            return builtin_montage(self.montage)
        if not os.path.exists(self.montage):
            raise ConfigError("montage: file not found: %s" % self.montage)
        return load_montage_file(self.montage)


def config_from_json(doc: dict) -> RunConfig:
    """Build a RunConfig from the single-document JSON config format."""
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object")
    cfg = RunConfig()
    src = doc.get("source", {})
    if not isinstance(src, dict):
        raise ConfigError("source: expected an object")
    cfg.scenario_path = src.get("scenario")
    cfg.replay_path = src.get("replay")
    cfg.montage = doc.get("montage", cfg.montage)
    cfg.sample_rate = float(doc.get("sample_rate", cfg.sample_rate))
    if doc.get("duration") is not None:
        cfg.duration = float(doc["duration"])
    cfg.seed = int(doc.get("seed", cfg.seed))
    cfg.chunk_len = int(doc.get("chunk_len", cfg.chunk_len))
    cfg.tick_rate = float(doc.get("tick_rate", cfg.tick_rate))
    try:
        cfg.mode = Mode(doc.get("mode", "avatar"))
    except ValueError:
        raise ConfigError("mode: must be 'avatar' or 'puppet'")
    cfg.offline = bool(doc.get("offline", cfg.offline))
    cfg.log_path = doc.get("log")
    puppet = doc.get("puppet")
    if puppet:
        cfg.puppet_host = puppet.get("host", "127.0.0.1")
        cfg.puppet_port = int(puppet.get("port", 5454))
    if doc.get("bridge_port") is not None:
        cfg.bridge_port = int(doc["bridge_port"])
    cfg.synth = _apply_overrides(cfg.synth, doc.get("synth"), "synth")
    cfg.dsp = _apply_overrides(cfg.dsp, doc.get("dsp"), "dsp")
    cfg.classifier = _apply_overrides(cfg.classifier, doc.get("classifier"),
                                      "classifier")
    cfg.topomap = _apply_overrides(cfg.topomap, doc.get("topomap"), "topomap")
    cfg.avatar = _apply_overrides(cfg.avatar, doc.get("avatar"), "avatar")
    known = {"source", "montage", "sample_rate", "duration", "seed", "chunk_len",
             "tick_rate", "mode", "offline", "log", "puppet", "bridge_port",
             "synth", "dsp", "classifier", "topomap", "avatar"}
    bad = set(doc) - known
    if bad:
        raise ConfigError("config: unknown key(s) %s" % ", ".join(sorted(bad)))
    return cfg


def load_config_file(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError("config: %s" % e)
    except json.JSONDecodeError as e:
        raise ConfigError("config: invalid JSON (%s)" % e)
    return config_from_json(doc)


@dataclass(frozen=True)
class TickInput:
    """One pipeline output frame: everything the tick loop needs."""

    t: float
    erd_values: np.ndarray
    valid: bool
    alpha_ratio: float
    mental: MentalState


class Pipeline:
    """source chunks -> artifact gate -> mu/alpha band-pass -> sliding band
    power -> baselines -> signed ERD + occipital alpha ratio -> classifier."""

    def __init__(self, cfg: RunConfig, montage: Montage):
        montage.require()
        self.cfg = cfg
        self.montage = montage
        fs = cfg.sample_rate
        n = len(montage)
        d = cfg.dsp
        self.mu_filter = StreamingBandpass(BandSpec(*d.mu_band, name="mu"), fs, n,
                                           order=d.filter_order)
        self.alpha_filter = StreamingBandpass(BandSpec(*d.alpha_band, name="alpha"),
                                              fs, n, order=d.filter_order)
        self.mu_power = SlidingPower(fs, n, d.window_s, cfg.tick_rate)
        self.alpha_power = SlidingPower(fs, n, d.window_s, cfg.tick_rate)
        self.mu_baseline = BaselineState(tau_s=d.baseline_tau_s)
        self.alpha_baseline = BaselineState(tau_s=d.baseline_tau_s)
        self.classifier = StateClassifier(cfg.classifier, montage)
        self._occ = [montage.index("O1"), montage.index("O2")]
        self._window = self.mu_power.window
        self._n_seen = 0
        self._contaminated_until = -1
        self._prev_erd = np.zeros(n)
        self._hop_dt = 1.0 / cfg.tick_rate

    def push(self, chunk: sources.SampleChunk):
        """Process one chunk; returns the list of completed TickInputs."""
        if chunk.channels != self.montage.labels:
            raise ValueError("chunk channels do not match montage")
        ok = artifact_gate(chunk, self.cfg.dsp.artifact_threshold_uv)
        samples = chunk.samples if ok else np.zeros_like(chunk.samples)
        self._n_seen += chunk.length
        if not ok:
            # the spike contaminates every window overlapping this chunk
            self._contaminated_until = self._n_seen
        mu = self.mu_filter.process(samples)
        alpha = self.alpha_filter.process(samples)
        mu_frames = self.mu_power.push(mu)
        alpha_frames = self.alpha_power.push(alpha)
        out = []
        for (t, mu_p), (_, alpha_p) in zip(mu_frames, alpha_frames):
            idx = int(round(t * self.cfg.sample_rate))
            frame_ok = idx - self._window >= self._contaminated_until
            freeze = self.classifier.state.motor != Motor.REST
            self.mu_baseline.update(mu_p, self._hop_dt, freeze=freeze or not frame_ok)
            self.alpha_baseline.update(alpha_p, self._hop_dt,
                                       freeze=freeze or not frame_ok)
            if frame_ok:
                erd, erd_valid = compute_erd(mu_p, self.mu_baseline.powers)
                valid = bool(np.all(erd_valid))
                self._prev_erd = erd
            else:
                # frozen at the previous frame, flagged invalid
                erd, valid = self._prev_erd, False
            ab = self.alpha_baseline.powers[self._occ]
            ap = alpha_p[self._occ]
            ratios = np.where(ab >= dsp.BASELINE_EPS, ap / np.maximum(ab, dsp.BASELINE_EPS), 1.0)
            alpha_ratio = float(np.mean(ratios))
            mental = self.classifier.update(erd, valid, alpha_ratio, t)
            out.append(TickInput(t, erd, valid, alpha_ratio, mental))
        return out


@dataclass
class RunResult:
    ticks: int = 0
    log_path: str | None = None
    wall_s: float = 0.0
    simulated_s: float = 0.0
    latencies_ms: list = field(default_factory=list)
    tick_drift_s: list = field(default_factory=list)
    dropped_frames: int = 0

    def latency_percentile(self, q: float) -> float:
        return float(np.percentile(self.latencies_ms, q)) if self.latencies_ms else 0.0


class Engine:
    """Everything downstream of the pipeline: avatar, protocol, log, bridge."""

    def __init__(self, cfg: RunConfig, montage: Montage, bridge=None):
        self.cfg = cfg
        self.montage = montage
        self.lattice = generate_lattice(N_LEDS)
        self.mapper = Topomapper(montage, self.lattice, cfg.topomap)
        self.avatar = Avatar(montage, self.mapper, cfg.avatar, mode=cfg.mode)
        self.bridge = bridge
        self.sender = (PuppetSender(cfg.puppet_host, cfg.puppet_port)
                       if cfg.puppet_host else None)
        self.seq = 0
        self.records = []
        self._dt = 1.0 / cfg.tick_rate

    def _drain_commands(self):
        if self.bridge is None:
            return
        while True:
            try:
                client, cmd = self.bridge.commands.get_nowait()
            except Exception:
                break
            if cmd["type"] == "set_mode":
                self.avatar.set_mode(Mode(cmd["mode"]))
            else:
                try:
                    self.avatar.apply_puppet_action(PuppetAction(cmd["action"]))
                except InvalidStateError:
                    self.bridge.reply_error(client, "invalid-state")

    def tick(self, frame: TickInput | None):
        """One tick: commands, avatar step, protocol emit, log, broadcast.
        Returns the processing latency in seconds."""
        t0 = time.perf_counter()
        self._drain_commands()
        if frame is not None:
            snap = self.avatar.step(self._dt, frame.mental, frame.erd_values)
            t = frame.t
        else:
            snap = self.avatar.step(self._dt)
            t = self.avatar.t
        self.seq += 1
        wire = encode_snapshot(snap, self.seq)
        if self.sender is not None:
            self.sender.send(wire)
        latency = time.perf_counter() - t0
        self.records.append({
            "t": round(t, 6),
            "mode": snap.mode.value,
            "mental": snap.mental.motor.value,
            "eyes": "closed" if snap.eyes_closed else "open",
            "servos": [round(float(a), 4) for a in snap.servo_angles],
            "erd": [round(float(v), 4) for v in snap.erd_values],
            "seq": self.seq,
        })
        if self.bridge is not None:
            self.bridge.publish(snap, self.seq)
        return latency

    def write_log(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    def close(self):
        if self.sender is not None:
            self.sender.close()


def make_source(cfg: RunConfig, montage: Montage):
    """Chunk iterator plus the total stream duration in seconds."""
    if cfg.scenario_path is not None:
        with open(cfg.scenario_path, "r", encoding="utf-8") as fh:
            scenario = parse_scenario(fh.read())
        duration = cfg.duration
        if duration is None:
            ends = [e.t + (e.duration or 0.0) for e in scenario]
            duration = (max(ends) if ends else 0.0) + 5.0
        chunks = synthesize(scenario, montage, cfg.sample_rate, duration,
                            cfg.chunk_len, seed=cfg.seed, cfg=cfg.synth)
        return chunks, duration
    with open(cfg.replay_path, "r", encoding="utf-8") as fh:
        text = fh.read()
    chunks = list(replay_csv(text, cfg.chunk_len))
    duration = chunks[-1].end_time - chunks[0].start_time if chunks else 0.0
    if cfg.duration is not None:
        duration = min(duration, cfg.duration)
        limit = chunks[0].start_time + cfg.duration if chunks else 0.0
        chunks = [c for c in chunks if c.start_time < limit]
    return iter(chunks), duration


def run(cfg: RunConfig, bridge=None) -> RunResult:
    """Execute a full run per the config; returns timing/observability data.

    Offline runs process the stream as fast as possible on one thread and
    are bit-deterministic; real-time runs pace the tick loop against the
    wall clock and keep only the freshest pending pipeline frame.
    """
    cfg.validate()
    montage = cfg.load_montage()
    pipeline = Pipeline(cfg, montage)
    engine = Engine(cfg, montage, bridge=bridge)
    result = RunResult()
    start = time.perf_counter()
    try:
        chunks, duration = make_source(cfg, montage)
        result.simulated_s = duration
        if cfg.offline:
            for chunk in chunks:
                for frame in pipeline.push(chunk):
                    result.latencies_ms.append(engine.tick(frame) * 1e3)
                    result.ticks += 1
        else:
            _run_realtime(cfg, pipeline, engine, chunks, result)
    except KeyboardInterrupt:
        pass
    finally:
        result.wall_s = time.perf_counter() - start
        if cfg.log_path:
            engine.write_log(cfg.log_path)
            result.log_path = cfg.log_path
        engine.close()
    return result


def _run_realtime(cfg: RunConfig, pipeline: Pipeline, engine: Engine,
                  chunks, result: RunResult):
    """Producer thread paces the source; the tick loop runs on absolute
    deadlines and drops all but the newest pending frame."""
    latest = collections.deque(maxlen=1)
    produced = collections.deque(maxlen=1)  # count of frames ever produced
    done = threading.Event()
    t0 = time.monotonic()

    def produce():
        n_frames = 0
        try:
            for chunk in chunks:
                lag = chunk.end_time - (time.monotonic() - t0)
                if lag > 0:
                    time.sleep(lag)
                for frame in pipeline.push(chunk):
                    if latest:
                        result.dropped_frames += 1
                    latest.append(frame)
                    n_frames += 1
        finally:
            produced.append(n_frames)
            done.set()

    producer = threading.Thread(target=produce, daemon=True)
    producer.start()
    period = 1.0 / cfg.tick_rate
    k = 1
    while True:
        deadline = t0 + k * period
        now = time.monotonic()
        if deadline > now:
            time.sleep(deadline - now)
        result.tick_drift_s.append(time.monotonic() - deadline)
        frame = latest.pop() if latest else None
        engine.tick(frame)
        result.ticks += 1
        k += 1
        if done.is_set() and not latest:
            break
    producer.join(timeout=1)


def export_projection(n: int = N_LEDS) -> dict:
    """Projection table consumed by the companion UI."""
    from .geometry import azimuthal_projection
    uv = azimuthal_projection(generate_lattice(n))
    return {"n": n, "uv": [[round(float(u), 6), round(float(v), 6)] for u, v in uv]}
