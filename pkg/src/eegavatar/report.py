"""Offline reporting from a state log: a delimited summary plus rendered
matplotlib figures (servo trajectories, central-electrode ERD traces and
the mental-state timeline).
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .avatar import SERVO_NAMES
from .geometry import Montage


def read_log(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError("log line %d: invalid JSON (%s)" % (ln, e))
    if not records:
        raise ValueError("log is empty")
    return records


def write_summary_csv(records, montage: Montage | None, path):
    erd_len = len(records[0]["erd"])
    if montage is not None and len(montage) == erd_len:
        erd_cols = ["erd_%s" % l for l in montage.labels]
    else:
        erd_cols = ["erd_%d" % i for i in range(erd_len)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mode", "mental", "eyes"]
                   + ["servo_%s" % n for n in SERVO_NAMES] + erd_cols + ["seq"])
        for r in records:
            w.writerow([r["t"], r["mode"], r["mental"], r["eyes"]]
                       + list(r["servos"]) + list(r["erd"]) + [r["seq"]])


def _central_indices(montage: Montage | None, erd_len: int):
    if montage is not None and len(montage) == erd_len:
        try:
            return {l: montage.index(l) for l in ("C3", "C4", "Cz")}
        except KeyError:
            pass
    return {}


def render_figures(records, montage: Montage | None, out_dir):
    t = np.array([r["t"] for r in records])
    servos = np.array([r["servos"] for r in records])
    erd = np.array([r["erd"] for r in records])
    paths = []

    fig, ax = plt.subplots(figsize=(8, 3.5))
    for i, name in enumerate(SERVO_NAMES):
        ax.plot(t, servos[:, i], label=name.replace("_", " "))
    ax.set_xlabel("time (s)")
    ax.set_ylabel("servo angle (deg)")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    p = os.path.join(out_dir, "servo_angles.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(8, 3.5))
    central = _central_indices(montage, erd.shape[1])
    if central:
        for lab, idx in central.items():
            ax.plot(t, erd[:, idx], label=lab)
    else:
        ax.plot(t, erd.min(axis=1), label="min over electrodes")
        ax.plot(t, erd.max(axis=1), label="max over electrodes")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("ERD/ERS (%)")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    p = os.path.join(out_dir, "erd_traces.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 3), sharex=True)
    states = ["rest", "left_hand", "right_hand", "feet"]
    ax1.step(t, [states.index(r["mental"]) for r in records], where="post")
    ax1.set_yticks(range(len(states)), states, fontsize=8)
    ax1.set_ylabel("motor")
    ax2.step(t, [1 if r["eyes"] == "closed" else 0 for r in records],
             where="post", color="tab:purple")
    ax2.set_yticks([0, 1], ["open", "closed"], fontsize=8)
    ax2.set_ylabel("eyes")
    ax2.set_xlabel("time (s)")
    fig.tight_layout()
    p = os.path.join(out_dir, "state_timeline.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)
    return paths


def build_report(log_path, out_dir, montage: Montage | None = None):
    """Write summary.csv and the figure set; returns the created paths."""
    os.makedirs(out_dir, exist_ok=True)
    records = read_log(log_path)
    csv_path = os.path.join(out_dir, "summary.csv")
    write_summary_csv(records, montage, csv_path)
    return [csv_path] + render_figures(records, montage, out_dir)
