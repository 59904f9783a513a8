"""Voronoi granular recording medium: geometry, material dispersion, state.

The tessellation uses the mirrored-seed construction: seed points inside the
track rectangle are reflected across all four edges and corners, so the
rectangle boundary becomes an exact set of Voronoi edges and the cells of the
original seeds tile the track with no gaps or overlaps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Voronoi

from . import constants
from .errors import ConfigError, EraseAboveCurieError, InvalidGeometryError
from .llb import equilibrium_magnetization

MEDIA_FORMAT = "hamr3d-media"
MEDIA_FORMAT_VERSION = 1

# Fraction of the lattice pitch used for seed-point jitter.  0.28 keeps cells
# compact while giving a realistic grain-size spread.
_JITTER_FRAC = 0.28


@dataclass
class GrainSpec:
    """One Voronoi grain: geometry plus sampled material constants."""

    id: int
    layer_index: int
    center: tuple[float, float]       # nm
    polygon: np.ndarray               # (k, 2) vertices, nm, CCW
    area: float                       # nm^2
    volume: float                     # nm^3
    easy_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    Ms0: float = 0.0                  # emu/cc
    Tc: float = 0.0                   # K
    Ku0: float = 0.0                  # erg/cc


@dataclass
class LayerStats:
    """Per-layer statistical parameters of the granular medium."""

    Ms0_mean: float
    Tc_mean: float
    sigma_Tc: float
    Ku0_mean: float
    sigma_Ku: float
    thickness: float
    grain_diameter_mean: float
    sigma_volume: float
    z_position: float = 0.0

    def validate(self):
        for name in ("Ms0_mean", "Tc_mean", "Ku0_mean", "thickness",
                     "grain_diameter_mean"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"LayerStats.{name} must be positive")
        for name in ("sigma_Tc", "sigma_Ku", "sigma_volume"):
            if getattr(self, name) < 0:
                raise ConfigError(f"LayerStats.{name} must be >= 0")


@dataclass
class MediaStack:
    """Multi-layer granular medium plus per-grain magnetization state.

    layers[0] is the top layer (nearest the heads); layers carry no coupling
    terms between them.  ``state[i]`` is the (n_grains, 3) reduced
    magnetization of layer i.
    """

    layers: list[tuple[LayerStats, list[GrainSpec]]]
    track_length: float
    track_width: float
    seed: int
    state: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.state:
            self.state = [np.zeros((len(grains), 3)) for _, grains in self.layers]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def grains(self, layer: int) -> list[GrainSpec]:
        return self.layers[layer][1]

    def stats(self, layer: int) -> LayerStats:
        return self.layers[layer][0]

    def median_tc(self, layer: int) -> float:
        return float(np.median([g.Tc for g in self.grains(layer)]))

    def copy(self) -> "MediaStack":
        return MediaStack(
            layers=self.layers,
            track_length=self.track_length,
            track_width=self.track_width,
            seed=self.seed,
            state=[m.copy() for m in self.state],
        )


# ---------------------------------------------------------------------------
# Tessellation
# ---------------------------------------------------------------------------

def _hex_seeds(length, width, mean_diameter, rng):
    """Jittered hexagonal seed points inside the track rectangle."""
    # pitch chosen so the mean cell area equals the equivalent-circle area
    pitch = mean_diameter * np.sqrt(np.pi / (2.0 * np.sqrt(3.0)))
    row_h = pitch * np.sqrt(3.0) / 2.0
    n_rows = max(1, int(np.ceil(width / row_h)) + 1)
    n_cols = max(1, int(np.ceil(length / pitch)) + 1)
    pts = []
    for r in range(n_rows + 1):
        y0 = (r + 0.5) * row_h - 0.5 * (n_rows * row_h - width)
        x_off = 0.25 * pitch if r % 2 == 0 else -0.25 * pitch
        for c in range(n_cols + 1):
            x0 = (c + 0.5) * pitch - 0.5 * (n_cols * pitch - length) + x_off
            pts.append((x0, y0))
    pts = np.asarray(pts)
    jit = rng.uniform(-_JITTER_FRAC * pitch, _JITTER_FRAC * pitch, pts.shape)
    pts = pts + jit
    keep = ((pts[:, 0] > 0) & (pts[:, 0] < length)
            & (pts[:, 1] > 0) & (pts[:, 1] < width))
    return pts[keep]


def _mirror(points, length, width):
    """Reflect seeds across all edges and corners of the rectangle."""
    x, y = points[:, 0], points[:, 1]
    copies = [points]
    for mx in (None, 0.0, length):
        for my in (None, 0.0, width):
            if mx is None and my is None:
                continue
            cx = x if mx is None else 2.0 * mx - x
            cy = y if my is None else 2.0 * my - y
            copies.append(np.column_stack([cx, cy]))
    return np.vstack(copies)


def _polygon_area_centroid(verts):
    x, y = verts[:, 0], verts[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    cross = x * y2 - x2 * y
    a = 0.5 * cross.sum()
    if abs(a) < 1e-12:
        return 0.0, (float(x.mean()), float(y.mean()))
    cx = ((x + x2) * cross).sum() / (6.0 * a)
    cy = ((y + y2) * cross).sum() / (6.0 * a)
    return abs(a), (float(cx), float(cy))


def _ccw(verts):
    c = verts.mean(axis=0)
    ang = np.arctan2(verts[:, 1] - c[1], verts[:, 0] - c[0])
    return verts[np.argsort(ang)]


def generate_voronoi(track_length: float, track_width: float,
                     mean_diameter: float, seed: int):
    """Seeded Voronoi tessellation of the track rectangle.

    Returns a list of dicts with keys center, polygon, area.  Deterministic
    for a fixed seed; the cells partition the rectangle exactly.
    """
    if mean_diameter <= 0 or track_length <= 0 or track_width <= 0:
        raise InvalidGeometryError("track dimensions and grain diameter must be positive")
    grain_area = np.pi * mean_diameter ** 2 / 4.0
    if track_length * track_width < 0.25 * grain_area:
        raise InvalidGeometryError(
            f"region {track_length} x {track_width} nm cannot host one "
            f"{mean_diameter} nm grain")

    rng = np.random.default_rng(seed)
    pts = _hex_seeds(track_length, track_width, mean_diameter, rng)
    if len(pts) == 0:
        pts = np.array([[track_length / 2.0, track_width / 2.0]])

    n = len(pts)
    allpts = _mirror(pts, track_length, track_width)
    vor = Voronoi(allpts)

    cells = []
    for i in range(n):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise InvalidGeometryError("unbounded Voronoi cell after mirroring")
        verts = _ccw(vor.vertices[region])
        # snap vertices onto the rectangle boundary (mirror construction puts
        # them there up to round-off)
        verts[:, 0] = np.clip(verts[:, 0], 0.0, track_length)
        verts[:, 1] = np.clip(verts[:, 1], 0.0, track_width)
        area, centroid = _polygon_area_centroid(verts)
        if area <= 0:
            raise InvalidGeometryError("degenerate Voronoi cell")
        cells.append({"center": centroid, "polygon": verts, "area": area})
    cells.sort(key=lambda c: (round(c["center"][1], 6), round(c["center"][0], 6)))
    return cells


# ---------------------------------------------------------------------------
# Property sampling
# ---------------------------------------------------------------------------

def sample_properties(geometry: list, stats: LayerStats, seed: int,
                      layer_index: int = 0) -> list[GrainSpec]:
    """Draw per-grain material constants from log-normal distributions.

    The configured means are used as distribution medians (log-normal
    location).  Grain volume is log-normal around each cell's geometric
    volume (area x thickness).  Ms0 is uniform across grains.
    """
    stats.validate()
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((len(geometry), 3))
    grains = []
    for i, cell in enumerate(geometry):
        tc = stats.Tc_mean * np.exp(stats.sigma_Tc * z[i, 0])
        ku = stats.Ku0_mean * np.exp(stats.sigma_Ku * z[i, 1])
        vol = cell["area"] * stats.thickness * np.exp(stats.sigma_volume * z[i, 2])
        grains.append(GrainSpec(
            id=i,
            layer_index=layer_index,
            center=cell["center"],
            polygon=cell["polygon"],
            area=cell["area"],
            volume=float(vol),
            Ms0=stats.Ms0_mean,
            Tc=float(tc),
            Ku0=float(ku),
        ))
    return grains


def build_stack(layer_stats: list[LayerStats], track_length: float,
                track_width: float, seed: int) -> MediaStack:
    """Generate a full MediaStack; layer i uses child seed (seed, i)."""
    layers = []
    z = 0.0
    for i, stats in enumerate(layer_stats):
        geom = generate_voronoi(track_length, track_width,
                                stats.grain_diameter_mean, seed * 1000 + i)
        grains = sample_properties(geom, stats, seed * 1000 + 500 + i, layer_index=i)
        stats.z_position = z - stats.thickness / 2.0
        z -= stats.thickness
        layers.append((stats, grains))
    return MediaStack(layers=layers, track_length=track_length,
                      track_width=track_width, seed=seed)


# ---------------------------------------------------------------------------
# State initialization
# ---------------------------------------------------------------------------

def dc_erase(stack: MediaStack, polarity: int, temperature: float) -> MediaStack:
    """Set every grain to polarity * m_e(T) along its easy axis (in place)."""
    if polarity not in (1, -1):
        raise ConfigError("polarity must be +1 or -1")
    for li in range(stack.n_layers):
        grains = stack.grains(li)
        tcs = np.array([g.Tc for g in grains])
        if np.any(temperature >= tcs):
            bad = int(np.argmax(temperature >= tcs))
            raise EraseAboveCurieError(
                f"erase temperature {temperature} K is at or above Tc = "
                f"{tcs[bad]:.1f} K of grain {grains[bad].id} in layer {li}")
        me = equilibrium_magnetization(temperature, tcs)
        axes = np.array([g.easy_axis for g in grains])
        stack.state[li] = polarity * me[:, None] * axes
    return stack


# ---------------------------------------------------------------------------
# Serialization (versioned structured text)
# ---------------------------------------------------------------------------

def _stats_dict(s: LayerStats) -> dict:
    return {k: getattr(s, k) for k in (
        "Ms0_mean", "Tc_mean", "sigma_Tc", "Ku0_mean", "sigma_Ku",
        "thickness", "grain_diameter_mean", "sigma_volume", "z_position")}


def save_media(stack: MediaStack, path, include_state: bool = False):
    doc = {
        "format": MEDIA_FORMAT,
        "version": MEDIA_FORMAT_VERSION,
        "seed": stack.seed,
        "track_length": stack.track_length,
        "track_width": stack.track_width,
        "layers": [],
    }
    for li, (stats, grains) in enumerate(stack.layers):
        layer = {"stats": _stats_dict(stats), "grains": []}
        for g in grains:
            rec = {
                "id": g.id,
                "layer": li,
                "center": list(g.center),
                "vertices": [list(map(float, v)) for v in g.polygon],
                "area": g.area,
                "volume": g.volume,
                "Ms0": g.Ms0,
                "Tc": g.Tc,
                "Ku0": g.Ku0,
                "easy_axis": list(g.easy_axis),
            }
            layer["grains"].append(rec)
        doc["layers"].append(layer)
    if include_state:
        doc["state"] = [m.tolist() for m in stack.state]
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_media(path) -> MediaStack:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MEDIA_FORMAT:
        raise ConfigError(f"{path}: not a {MEDIA_FORMAT} file")
    if doc.get("version") != MEDIA_FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported media format version "
                          f"{doc.get('version')}")
    layers = []
    for li, layer in enumerate(doc["layers"]):
        stats = LayerStats(**layer["stats"])
        grains = []
        for rec in layer["grains"]:
            grains.append(GrainSpec(
                id=rec["id"], layer_index=li,
                center=tuple(rec["center"]),
                polygon=np.asarray(rec["vertices"]),
                area=rec["area"], volume=rec["volume"],
                easy_axis=tuple(rec["easy_axis"]),
                Ms0=rec["Ms0"], Tc=rec["Tc"], Ku0=rec["Ku0"]))
        layers.append((stats, grains))
    stack = MediaStack(layers=layers, track_length=doc["track_length"],
                       track_width=doc["track_width"], seed=doc["seed"])
    if "state" in doc:
        stack.state = [np.asarray(m) for m in doc["state"]]
    return stack


def default_layer_stats() -> list[LayerStats]:
    return [LayerStats(**constants.TOP_LAYER), LayerStats(**constants.BOTTOM_LAYER)]
