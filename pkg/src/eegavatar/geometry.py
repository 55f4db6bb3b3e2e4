"""Hemispherical scalp geometry: electrode montages, the LED lattice,
geodesic distances and the top-down azimuthal projection.

Coordinate convention: unit vectors with +x toward the nose, +y toward the
left ear, +z toward the vertex. Only the upper hemisphere (z >= 0) is used.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

UNIT_NORM_TOL = 1e-6

#: electrodes the classifier and synthetic generator depend on
REQUIRED_LABELS = ("C3", "C4", "Cz", "O1", "O2")


class MontageError(ValueError):
    """Raised for malformed montage documents (carries the failing line)."""


def _check_unit(p, tol=UNIT_NORM_TOL):
    p = np.asarray(p, dtype=float)
    norms = np.linalg.norm(p, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError("expected unit vector(s), got norm deviation > %g" % tol)
    return p


def geodesic_distance(a, b) -> float:
    """Great-circle angle in radians between two unit vectors, in [0, pi]."""
    a = _check_unit(a)
    b = _check_unit(b)
    d = float(np.clip(np.dot(a, b), -1.0, 1.0))
    return math.acos(d)


def geodesic_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise geodesic distances between rows of a (n,3) and b (m,3)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dots = np.clip(a @ b.T, -1.0, 1.0)
    return np.arccos(dots)


def generate_lattice(n: int) -> np.ndarray:
    """Deterministic Fibonacci-spiral sampling of the upper hemisphere.

    Returns an (n, 3) array of unit vectors; row index is the LED id used
    on the wire and in every rendered field. Same n always yields bitwise
    identical output.
    """
    if n < 1:
        raise ValueError("lattice size must be >= 1")
    if n == 1:
        return np.array([[0.0, 0.0, 1.0]])
    i = np.arange(n)
    z = 1.0 - (i + 0.5) / n  # z in (0, 1), denser toward vertex is avoided
    r = np.sqrt(1.0 - z * z)
    phi = i * GOLDEN_ANGLE
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    # renormalize to kill accumulated rounding
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts


def azimuthal_projection(points) -> np.ndarray:
    """Polar azimuthal-equidistant projection of upper-hemisphere points.

    u = inclination * cos(azimuth), v = inclination * sin(azimuth); the
    vertex maps to the origin, the nose direction to (+pi/2, 0).
    """
    p = _check_unit(points)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    theta = np.arccos(np.clip(p[:, 2], -1.0, 1.0))
    az = np.arctan2(p[:, 1], p[:, 0])
    uv = np.column_stack([theta * np.cos(az), theta * np.sin(az)])
    return uv[0] if single else uv


def mirror_lr(points) -> np.ndarray:
    """Left/right mirror map (x, y, z) -> (x, -y, z); an isometry."""
    p = np.array(points, dtype=float, copy=True)
    p[..., 1] = -p[..., 1]
    return p


def sph_to_cart(inclination_deg: float, azimuth_deg: float) -> np.ndarray:
    """Scalp spherical coordinates (degrees) to a unit vector.

    Inclination is measured from the vertex, azimuth from the nose (+x)
    toward the left ear (+y).
    """
    inc = math.radians(inclination_deg)
    az = math.radians(azimuth_deg)
    return np.array([math.sin(inc) * math.cos(az),
                     math.sin(inc) * math.sin(az),
                     math.cos(inc)])


@dataclass(frozen=True)
class Montage:
    """Ordered, labelled set of electrode positions on the hemisphere."""

    name: str
    labels: tuple
    positions: np.ndarray  # (n, 3) unit vectors, row order = channel order

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        pos = np.asarray(self.positions, dtype=float)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError("montage %r has no electrode %r" % (self.name, label))

    def position(self, label: str) -> np.ndarray:
        return self.positions[self.index(label)]

    def require(self, labels=REQUIRED_LABELS):
        missing = [l for l in labels if l not in self.labels]
        if missing:
            raise ValueError("montage %r is missing electrode(s): %s"
                             % (self.name, ", ".join(missing)))
        return self

    def mirrored(self, swap_pairs=(("C3", "C4"), ("O1", "O2"))) -> "Montage":
        """Mirror positions across the midline and swap paired labels.

        Used by symmetry tests: the result holds the same electrode set with
        each paired label sitting at its partner's mirrored position.
        """
        swap = {}
        for a, b in swap_pairs:
            swap[a] = b
            swap[b] = a
        labels = tuple(swap.get(l, l) for l in self.labels)
        return Montage(self.name + "-mirrored", labels, mirror_lr(self.positions))


def load_montage(text: str, name: str = "montage") -> Montage:
    """Parse the montage CSV: header `label,inclination_deg,azimuth_deg`."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise MontageError("line 1: empty montage document")
    header = [c.strip().lower() for c in rows[0]]
    if header != ["label", "inclination_deg", "azimuth_deg"]:
        raise MontageError("line 1: expected header "
                           "'label,inclination_deg,azimuth_deg'")
    labels, positions = [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise MontageError("line %d: expected 3 fields, got %d" % (ln, len(row)))
        label = row[0].strip()
        if not label:
            raise MontageError("line %d: empty label" % ln)
        if label in labels:
            raise MontageError("line %d: duplicate label %r" % (ln, label))
        try:
            inc = float(row[1])
            az = float(row[2])
        except ValueError:
            raise MontageError("line %d: non-numeric coordinate" % ln)
        if not 0.0 <= inc <= 90.0:
            raise MontageError("line %d: inclination %g outside [0, 90]" % (ln, inc))
        labels.append(label)
        positions.append(sph_to_cart(inc, az))
    if not labels:
        raise MontageError("line 2: montage has no electrodes")
    return Montage(name, tuple(labels), np.array(positions))


def load_montage_file(path) -> Montage:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    import os
    return load_montage(text, name=os.path.splitext(os.path.basename(path))[0])


def builtin_montage(name: str) -> Montage:
    """Load a shipped montage fixture: 'standard20' or 'standard32'."""
    import importlib.resources as res
    fname = {"standard20": "montage_20.csv", "standard32": "montage_32.csv"}.get(name)
    if fname is None:
        raise KeyError("unknown builtin montage %r" % name)
    text = res.files("eegavatar").joinpath("data", fname).read_text("utf-8")
    return load_montage(text, name=name)
