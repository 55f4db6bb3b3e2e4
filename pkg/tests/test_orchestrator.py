import json
import os

import numpy as np
import pytest

from conftest import FIXTURE_SCENARIO, write_scenario
from eegavatar import orchestrator
from eegavatar.orchestrator import (ConfigError, RunConfig, config_from_json,
                                    load_config_file, run)
from eegavatar.sources import ScenarioEvent, synthesize, write_csv


@pytest.fixture()
def scenario_file(tmp_path):
    return write_scenario(tmp_path / "scen.jsonl", FIXTURE_SCENARIO)


def offline_cfg(scenario_file, tmp_path, **kw):
    defaults = dict(scenario_path=scenario_file, duration=6.0, seed=1,
                    offline=True, log_path=str(tmp_path / "log.jsonl"))
    defaults.update(kw)
    return RunConfig(**defaults)


def read_log(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh]


class TestConfig:
    def test_both_sources_rejected(self, scenario_file):
        cfg = RunConfig(scenario_path=scenario_file, replay_path=scenario_file)
        with pytest.raises(ConfigError, match="source"):
            cfg.validate()

    def test_no_source_rejected(self):
        with pytest.raises(ConfigError, match="source"):
            RunConfig().validate()

    def test_missing_file_named(self):
        with pytest.raises(ConfigError, match="scenario"):
            RunConfig(scenario_path="/nonexistent.jsonl").validate()

    def test_tick_rate_range(self, scenario_file):
        with pytest.raises(ConfigError, match="tick_rate"):
            RunConfig(scenario_path=scenario_file, tick_rate=500.0).validate()

    def test_json_round_trip(self, scenario_file, tmp_path):
        doc = {
            "source": {"scenario": scenario_file},
            "montage": "standard32",
            "sample_rate": 256,
            "duration": 4.0,
            "seed": 3,
            "tick_rate": 20,
            "mode": "puppet",
            "dsp": {"baseline_tau_s": 10.0},
            "classifier": {"erd_enter": -40.0},
            "topomap": {"blur_sigma": 0.05},
            "avatar": {"raised_deg": 45.0},
            "synth": {"noise_rms": 5.0},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        cfg = load_config_file(str(path))
        cfg.validate()
        assert cfg.sample_rate == 256
        assert cfg.dsp.baseline_tau_s == 10.0
        assert cfg.classifier.erd_enter == -40.0
        assert cfg.avatar.raised_deg == 45.0
        assert cfg.mode.value == "puppet"

    def test_unknown_keys_named(self, scenario_file):
        with pytest.raises(ConfigError, match="bogus"):
            config_from_json({"source": {"scenario": scenario_file}, "bogus": 1})
        with pytest.raises(ConfigError, match="dsp"):
            config_from_json({"source": {"scenario": scenario_file},
                              "dsp": {"nope": 1}})


class TestOfflineRun:
    def test_fixture_scenario_transitions(self, scenario_file, tmp_path):
        cfg = offline_cfg(scenario_file, tmp_path, duration=12.0)
        result = run(cfg)
        records = read_log(cfg.log_path)
        assert result.ticks == len(records)
        closed = [r["t"] for r in records if r["eyes"] == "closed"]
        assert closed and 2.0 <= min(closed) <= 3.5
        left = [r["t"] for r in records if r["mental"] == "left_hand"]
        assert left and min(left) < 7.5 and max(left) > 5.0

    def test_empty_scenario_stays_neutral(self, tmp_path):
        scen = write_scenario(tmp_path / "empty.jsonl", [])
        cfg = offline_cfg(scen, tmp_path, duration=5.0)
        run(cfg)
        for r in read_log(cfg.log_path):
            assert r["mental"] == "rest" and r["eyes"] == "open"

    def test_offline_determinism(self, scenario_file, tmp_path):
        cfg1 = offline_cfg(scenario_file, tmp_path,
                           log_path=str(tmp_path / "a.jsonl"))
        cfg2 = offline_cfg(scenario_file, tmp_path,
                           log_path=str(tmp_path / "b.jsonl"))
        run(cfg1)
        run(cfg2)
        assert open(cfg1.log_path, "rb").read() == open(cfg2.log_path, "rb").read()

    def test_log_strictly_ordered(self, scenario_file, tmp_path):
        cfg = offline_cfg(scenario_file, tmp_path)
        run(cfg)
        ts = [r["t"] for r in read_log(cfg.log_path)]
        assert all(b > a for a, b in zip(ts, ts[1:]))

    def test_replay_source(self, tmp_path, montage32):
        chunks = synthesize([ScenarioEvent(1.0, "eyes_closed")], montage32,
                            512.0, 3.0, 256, seed=2)
        rec = tmp_path / "rec.csv"
        with open(rec, "w") as fh:
            write_csv(chunks, fh)
        cfg = RunConfig(replay_path=str(rec), offline=True,
                        log_path=str(tmp_path / "log.jsonl"))
        result = run(cfg)
        assert result.ticks > 30

    def test_puppet_mode_run_ignores_eeg(self, scenario_file, tmp_path):
        from eegavatar.avatar import Mode
        cfg = offline_cfg(scenario_file, tmp_path, mode=Mode.PUPPET, duration=8.0)
        run(cfg)
        for r in read_log(cfg.log_path):
            assert r["mode"] == "puppet"
            assert r["servos"] == [0.0, 0.0, 0.0, 0.0]

    def test_emits_to_puppet_emulator(self, scenario_file, tmp_path):
        import socket
        import threading

        from eegavatar import protocol
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        sock.close()
        emu = protocol.PuppetEmulator()
        stop = threading.Event()
        thread = threading.Thread(target=protocol.serve_emulator,
                                  args=(emu, "127.0.0.1", port, stop), daemon=True)
        thread.start()
        cfg = offline_cfg(scenario_file, tmp_path, duration=3.0,
                          puppet_host="127.0.0.1", puppet_port=port)
        result = run(cfg)
        import time
        deadline = time.time() + 2.0
        while time.time() < deadline and emu.snapshot()[2] < result.ticks // 2:
            time.sleep(0.05)
        stop.set()
        thread.join(timeout=2)
        frame, seq, received, dropped, errors = emu.snapshot()
        assert errors == 0 and received > 0
        assert seq <= result.ticks


class TestRealtimeRun:
    def test_short_realtime_run_paces(self, tmp_path):
        scen = write_scenario(tmp_path / "s.jsonl", [])
        cfg = RunConfig(scenario_path=scen, duration=2.0, offline=False,
                        log_path=str(tmp_path / "log.jsonl"))
        import time
        t0 = time.monotonic()
        result = run(cfg)
        wall = time.monotonic() - t0
        assert 1.5 <= wall <= 4.0
        assert abs(result.ticks - 60) <= 8
        # absolute deadlines: scheduler jitter must not accumulate, so the
        # tail of the run has to be back on schedule
        assert min(result.tick_drift_s[-5:]) < 1.0 / cfg.tick_rate


class TestProjectionExport:
    def test_table_shape(self):
        table = orchestrator.export_projection()
        assert table["n"] == 402
        assert len(table["uv"]) == 402
        r = [np.hypot(u, v) for u, v in table["uv"]]
        assert max(r) <= np.pi / 2 + 1e-6
