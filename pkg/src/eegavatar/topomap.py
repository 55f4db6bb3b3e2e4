"""Scalp topography: inverse-distance interpolation of electrode values
onto the LED lattice, the diverging red/blue colormap, the optional
spherical diffusion blur, and a PPM dump of the projected field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Montage, azimuthal_projection, geodesic_matrix


@dataclass(frozen=True)
class TopomapConfig:
    idw_exponent: float = 2.0
    snap_radius: float = 1e-6
    neighbor_count: int | None = None  # None = all electrodes
    blur_sigma: float = 0.0
    value_range: float = 100.0
    erd_color: str = "red"  # color of negative (desynchronization) values

    def __post_init__(self):
        if self.idw_exponent <= 0 or self.snap_radius < 0 or self.blur_sigma < 0:
            raise ValueError("invalid topomap configuration")
        if self.neighbor_count is not None and self.neighbor_count < 1:
            raise ValueError("neighbor_count must be >= 1")
        if self.value_range <= 0:
            raise ValueError("value_range must be > 0")
        if self.erd_color not in ("red", "blue"):
            raise ValueError("erd_color must be 'red' or 'blue'")


def interpolation_weights(positions: np.ndarray, queries: np.ndarray,
                          cfg: TopomapConfig = TopomapConfig()) -> np.ndarray:
    """(n_queries, n_electrodes) row-stochastic IDW weight matrix.

    Queries within snap_radius of an electrode take that electrode's value
    exactly; otherwise weights are 1/d^p over the k nearest electrodes.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.shape[0] == 0:
        raise ValueError("empty montage")
    d = geodesic_matrix(np.atleast_2d(queries), positions)
    nq, ne = d.shape
    w = np.zeros((nq, ne))
    k = ne if cfg.neighbor_count is None else min(cfg.neighbor_count, ne)
    nearest = np.argmin(d, axis=1)
    snapped = d[np.arange(nq), nearest] <= cfg.snap_radius
    w[snapped, nearest[snapped]] = 1.0
    free = ~snapped
    if np.any(free):
        df = d[free]
        if k < ne:
            order = np.argsort(df, axis=1)
            mask = np.zeros_like(df, dtype=bool)
            np.put_along_axis(mask, order[:, :k], True, axis=1)
        else:
            mask = np.ones_like(df, dtype=bool)
        wf = np.where(mask, 1.0 / df ** cfg.idw_exponent, 0.0)
        w[free] = wf / wf.sum(axis=1, keepdims=True)
    return w


def interpolate(values, montage: Montage, queries,
                cfg: TopomapConfig = TopomapConfig()) -> np.ndarray:
    """Interpolate per-electrode values at arbitrary hemisphere points."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("electrode values must be finite")
    return interpolation_weights(montage.positions, queries, cfg) @ values


def diffusion_matrix(lattice: np.ndarray, blur_sigma: float) -> np.ndarray:
    """Row-normalized spherical Gaussian blur over the lattice points.

    blur_sigma = 0 gives the identity (no diffusion).
    """
    if blur_sigma < 0:
        raise ValueError("blur_sigma must be >= 0")
    n = lattice.shape[0]
    if blur_sigma == 0:
        return np.eye(n)
    d = geodesic_matrix(lattice, lattice)
    w = np.exp(-0.5 * (d / blur_sigma) ** 2)
    return w / w.sum(axis=1, keepdims=True)


def colormap(values, value_range: float = 100.0, erd_color: str = "red") -> np.ndarray:
    """Diverging map: 0 -> off, negative -> red ramp, positive -> blue ramp
    (linear in magnitude, clamped at +-value_range). 8-bit RGB output."""
    if value_range <= 0:
        raise ValueError("value_range must be > 0")
    v = np.atleast_1d(np.asarray(values, dtype=float))
    mag = np.rint(np.clip(np.abs(v), 0.0, value_range) / value_range * 255.0)
    rgb = np.zeros(v.shape + (3,), dtype=np.uint8)
    neg_ch, pos_ch = (0, 2) if erd_color == "red" else (2, 0)
    rgb[..., neg_ch] = np.where(v < 0, mag, 0).astype(np.uint8)
    rgb[..., pos_ch] = np.where(v > 0, mag, 0).astype(np.uint8)
    return rgb


class Topomapper:
    """Precomputed interpolation + diffusion + colormap for one montage and
    lattice; the per-frame work is two small matrix products."""

    def __init__(self, montage: Montage, lattice: np.ndarray,
                 cfg: TopomapConfig = TopomapConfig()):
        self.montage = montage
        self.lattice = lattice
        self.cfg = cfg
        w = interpolation_weights(montage.positions, lattice, cfg)
        self._w = diffusion_matrix(lattice, cfg.blur_sigma) @ w

    def values(self, electrode_values) -> np.ndarray:
        v = np.asarray(electrode_values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("electrode values must be finite")
        return self._w @ v

    def colors(self, electrode_values) -> tuple:
        vals = self.values(electrode_values)
        return vals, colormap(vals, self.cfg.value_range, self.cfg.erd_color)


def render_ppm(colors: np.ndarray, uv: np.ndarray, size: int = 256,
               disc_radius: float | None = None) -> bytes:
    """Rasterize LED discs (projected positions uv, 8-bit colors) to a
    binary P6 PPM image, nose pointing up."""
    colors = np.asarray(colors, dtype=np.uint8)
    uv = np.asarray(uv, dtype=float)
    half_pi = np.pi / 2.0
    # u (nose) maps up, v (left ear) maps left on screen
    px = np.rint((0.5 - uv[:, 1] / (2.2 * half_pi)) * (size - 1)).astype(int)
    py = np.rint((0.5 - uv[:, 0] / (2.2 * half_pi)) * (size - 1)).astype(int)
    if disc_radius is None:
        disc_radius = max(1.0, size / 60.0)
    r = int(round(disc_radius))
    img = np.zeros((size, size, 3), dtype=np.uint8)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    disc = (yy * yy + xx * xx) <= r * r
    for i in range(colors.shape[0]):
        y0, y1 = max(0, py[i] - r), min(size, py[i] + r + 1)
        x0, x1 = max(0, px[i] - r), min(size, px[i] + r + 1)
        if y0 >= y1 or x0 >= x1:
            continue
        sub = disc[(y0 - py[i] + r):(y1 - py[i] + r), (x0 - px[i] + r):(x1 - px[i] + r)]
        img[y0:y1, x0:x1][sub] = colors[i]
    header = b"P6\n%d %d\n255\n" % (size, size)
    return header + img.tobytes()


def render_field_ppm(montage: Montage, lattice: np.ndarray, values,
                     cfg: TopomapConfig = TopomapConfig(), size: int = 256) -> bytes:
    """One-shot: interpolate electrode values and rasterize the LED field."""
    mapper = Topomapper(montage, lattice, cfg)
    _, colors = mapper.colors(values)
    return render_ppm(colors, azimuthal_projection(lattice), size=size)
