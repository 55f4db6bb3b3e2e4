"""Command line entry points: run the host pipeline, emulate the puppet,
render a one-shot topomap, build a report from a state log, and export the
LED projection table for the companion UI.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import threading
import time

import click

from . import orchestrator
from .geometry import builtin_montage, load_montage_file
from .orchestrator import ConfigError


def _montage_option(name):
    if name in ("standard20", "standard32"):
        return builtin_montage(name)
    if not os.path.exists(name):
        raise ConfigError("montage: file not found: %s" % name)
    return load_montage_file(name)


@click.group()
def main():
    """Virtual tangible-EEG avatar host tools."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="JSON run configuration.")
@click.option("--offline", is_flag=True, default=False,
              help="Run faster than real time on a simulated clock.")
@click.option("--duration", type=float, default=None, help="Override run length (s).")
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="Override state log path (JSON Lines).")
@click.option("--seed", type=int, default=None, help="Override noise seed.")
def run(config_path, offline, duration, log_path, seed):
    """Run the full pipeline from the configured source."""
    try:
        cfg = orchestrator.load_config_file(config_path)
        if offline:
            cfg.offline = True
        if duration is not None:
            cfg.duration = duration
        if log_path is not None:
            cfg.log_path = log_path
        if seed is not None:
            cfg.seed = seed
        cfg.validate()
    except ConfigError as e:
        click.echo("config error: %s" % e, err=True)
        sys.exit(2)
    bridge = None
    try:
        if cfg.bridge_port is not None:
            from .bridge import UiBridge
            bridge = UiBridge(cfg.bridge_port)
            click.echo("ui bridge listening on ws://127.0.0.1:%d" % bridge.port)
        result = orchestrator.run(cfg, bridge=bridge)
    except ConfigError as e:
        click.echo("config error: %s" % e, err=True)
        sys.exit(2)
    except Exception as e:
        click.echo("runtime error: %s" % e, err=True)
        sys.exit(3)
    finally:
        if bridge is not None:
            bridge.close()
    click.echo("run complete: %d ticks, %.1f s simulated, %.2f s wall"
               % (result.ticks, result.simulated_s, result.wall_s))
    if result.log_path:
        click.echo("state log: %s" % result.log_path)


@main.command()
@click.option("--listen", default="0.0.0.0:5454", show_default=True,
              help="UDP address:port to receive puppet frames on.")
@click.option("--dump-ppm", "dump_dir", type=click.Path(), default=None,
              help="Directory for periodic PPM dumps of the received LED field.")
@click.option("--dump-interval", type=float, default=1.0, show_default=True)
@click.option("--duration", type=float, default=None,
              help="Stop after this many seconds (default: run until ^C).")
def emulate(listen, dump_dir, dump_interval, duration):
    """Run the virtual puppet: receive frames and track displayed state."""
    from . import protocol
    from .geometry import azimuthal_projection, generate_lattice
    from .topomap import render_ppm
    try:
        host, port = listen.rsplit(":", 1)
        port = int(port)
    except ValueError:
        click.echo("config error: --listen must be addr:port", err=True)
        sys.exit(2)
    emu = protocol.PuppetEmulator()
    stop = threading.Event()
    thread = threading.Thread(target=protocol.serve_emulator,
                              args=(emu, host, port, stop), daemon=True)
    thread.start()
    click.echo("puppet emulator listening on %s:%d" % (host, port))
    uv = azimuthal_projection(generate_lattice(protocol.N_LEDS))
    if dump_dir:
        os.makedirs(dump_dir, exist_ok=True)
    start = time.monotonic()
    n_dumped = 0
    try:
        while duration is None or time.monotonic() - start < duration:
            time.sleep(dump_interval)
            frame, seq, received, dropped, errors = emu.snapshot()
            click.echo("seq=%s received=%d dropped=%d errors=%d"
                       % (seq, received, dropped, errors))
            if dump_dir and frame is not None:
                import numpy as np
                colors = np.frombuffer(frame.led_rgb, dtype=np.uint8).reshape(-1, 3)
                path = os.path.join(dump_dir, "frame_%06d.ppm" % n_dumped)
                with open(path, "wb") as fh:
                    fh.write(render_ppm(colors, uv))
                n_dumped += 1
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        thread.join(timeout=1)


@main.command()
@click.option("--erd", "erd_path", required=True, type=click.Path(exists=True),
              help="CSV of per-electrode values: label,value rows.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--montage", default="standard32", show_default=True)
@click.option("--blur", type=float, default=0.0, show_default=True,
              help="Diffusion blur sigma in radians.")
@click.option("--size", type=int, default=256, show_default=True)
def render(erd_path, out_path, montage, blur, size):
    """One-shot topomap render of an ERD value file to a PPM image."""
    from dataclasses import replace as dc_replace

    from .geometry import generate_lattice
    from .topomap import TopomapConfig, render_field_ppm
    try:
        mont = _montage_option(montage)
        values = {}
        with open(erd_path, "r", encoding="utf-8") as fh:
            for ln, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().lower() == "label":
                    continue
                if len(row) != 2:
                    raise ConfigError("erd: line %d: expected label,value" % ln)
                values[row[0].strip()] = float(row[1])
        missing = [l for l in mont.labels if l not in values]
        if missing:
            raise ConfigError("erd: missing value(s) for %s" % ", ".join(missing))
        vec = [values[l] for l in mont.labels]
    except (ConfigError, ValueError) as e:
        click.echo("config error: %s" % e, err=True)
        sys.exit(2)
    try:
        cfg = dc_replace(TopomapConfig(), blur_sigma=blur)
        ppm = render_field_ppm(mont, generate_lattice(orchestrator.N_LEDS),
                               vec, cfg, size=size)
        with open(out_path, "wb") as fh:
            fh.write(ppm)
    except Exception as e:
        click.echo("runtime error: %s" % e, err=True)
        sys.exit(3)
    click.echo("wrote %s" % out_path)


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--montage", default="standard32", show_default=True)
def report(log_path, out_dir, montage):
    """Summarize a state log: delimited summary plus figures."""
    from .report import build_report
    try:
        mont = _montage_option(montage)
    except ConfigError as e:
        click.echo("config error: %s" % e, err=True)
        sys.exit(2)
    try:
        paths = build_report(log_path, out_dir, mont)
    except ValueError as e:
        click.echo("runtime error: %s" % e, err=True)
        sys.exit(3)
    for p in paths:
        click.echo("wrote %s" % p)


@main.command("export-projection")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("-n", "n_leds", type=int, default=orchestrator.N_LEDS,
              show_default=True)
def export_projection(out_path, n_leds):
    """Write the LED projection table JSON consumed by the companion UI."""
    try:
        table = orchestrator.export_projection(n_leds)
    except ValueError as e:
        click.echo("config error: %s" % e, err=True)
        sys.exit(2)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(table, fh)
    click.echo("wrote %s" % out_path)


if __name__ == "__main__":
    main()
