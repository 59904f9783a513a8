"""Recording-quality metrics: switching possibility, medium SNR, sweeps.

Two metrics quantify write quality:

* effective switching possibility: integral of the cross-track-averaged,
  saturation-normalized magnetization over the actual switched window,
  divided by the integral of the unit-plateau write-field profile over the
  ideal window;
* medium SNR: 10 log10 of integrated squared mean transition profile over
  integrated variance, evaluated on transition-aligned windows.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import constants, fields, protocol, rng
from .errors import ConfigError, InsufficientTransitionsError
from .llb import LlbParams, equilibrium_magnetization
from .media import LayerStats, MediaStack, build_stack


@dataclass
class TrackProfile:
    """Down-track magnetization profile of one layer."""

    x_grid: np.ndarray
    mz_mean: np.ndarray
    mz_var: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


@dataclass
class SpEffResult:
    value: float
    switched: bool
    window: tuple[float, float] | None


@dataclass
class AlignedWindows:
    x: np.ndarray        # window grid, transition-centered
    mean: np.ndarray
    var: np.ndarray
    n_windows: int


@dataclass
class SweepPoint:
    delta_d: float
    snr_top: float
    snr_bottom: float
    snr_system: float
    clamped: bool = False


@dataclass
class SweepResult:
    points: list[SweepPoint]
    delta_d_opt: float
    snr_max: float


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def _chords(grains, x):
    """Cross-track chord length of every grain on the grid (area weights)."""
    num = np.zeros_like(x)
    den = np.zeros_like(x)
    weights = []
    for g in grains:
        v = g.polygon
        xmin, xmax = v[:, 0].min(), v[:, 0].max()
        i0 = np.searchsorted(x, xmin, "left")
        i1 = np.searchsorted(x, xmax, "right")
        if i1 <= i0:
            mid = min(max(i0, 0), len(x) - 1)
            w = np.zeros(1)
            weights.append((slice(mid, mid + 1), np.array([g.area])))
            continue
        xs = x[i0:i1]
        ylo = np.full(len(xs), np.inf)
        yhi = np.full(len(xs), -np.inf)
        n = len(v)
        for k in range(n):
            px, py = v[k]
            qx, qy = v[(k + 1) % n]
            if px == qx:
                continue
            lo, hi = (px, qx) if px < qx else (qx, px)
            msk = (xs >= lo) & (xs <= hi)
            if not msk.any():
                continue
            yy = py + (xs[msk] - px) * (qy - py) / (qx - px)
            ylo[msk] = np.minimum(ylo[msk], yy)
            yhi[msk] = np.maximum(yhi[msk], yy)
        w = np.clip(yhi - ylo, 0.0, None)
        w[~np.isfinite(w)] = 0.0
        weights.append((slice(i0, i1), w))
    return weights


def track_profile(stack: MediaStack, layer: int, state=None,
                  dx: float = 0.5, meta: dict | None = None) -> TrackProfile:
    """Cross-track, area-weighted average of grain m_z on a uniform grid."""
    if dx <= 0 or dx > 1.0:
        raise ConfigError("grid spacing must be in (0, 1] nm")
    x = np.arange(0.0, stack.track_length + dx / 2, dx)
    grains = stack.grains(layer)
    mz = (state if state is not None else stack.state[layer])[:, 2]
    num = np.zeros_like(x)
    den = np.zeros_like(x)
    for (sl, w), v in zip(_chords(grains, x), mz):
        num[sl] += w * v
        den[sl] += w
    mean = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return TrackProfile(x_grid=x, mz_mean=mean, meta=dict(meta or {},
                        layer=layer))


def saturation_level(stack: MediaStack, layer: int,
                     params: LlbParams | None = None) -> float:
    """Remanent |m_z| of the layer at ambient temperature."""
    p = params or LlbParams()
    return float(equilibrium_magnetization(
        p.t_env, stack.median_tc(layer), p.beta_me, p.epsilon_m))


# ---------------------------------------------------------------------------
# Effective switching possibility
# ---------------------------------------------------------------------------

def segment_field_profile(x_grid, seg_lo: float, seg_hi: float,
                          fwhm_H: float, window_mode: str = "segment"):
    """Unit-plateau static write-field profile and the ideal window.

    The plateau spans the commanded segment; outside it the profile decays
    as a Gaussian of the distance to the nearer segment edge.  The ideal
    window is the segment itself (mode "segment") or the half-maximum span
    (mode "half_max").
    """
    sigma = fwhm_H * constants.FWHM_TO_SIGMA
    x = np.asarray(x_grid, dtype=float)
    dist = np.maximum(np.maximum(seg_lo - x, x - seg_hi), 0.0)
    prof = np.exp(-dist ** 2 / (2.0 * sigma ** 2))
    if window_mode == "segment":
        window = (seg_lo, seg_hi)
    elif window_mode == "half_max":
        window = (seg_lo - fwhm_H / 2.0, seg_hi + fwhm_H / 2.0)
    else:
        raise ConfigError(f"unknown window mode {window_mode!r}")
    return prof, window


def sp_eff(profile: TrackProfile, field_profile, ideal_window,
           saturation: float = 1.0) -> SpEffResult:
    """Effective switching possibility.

    Numerator: trapezoidal integral of mz_mean/saturation over the actual
    switching region, the maximal contiguous interval around the ideal
    window's center where mz_mean > 0 (edges refined by linear zero
    crossings).  Denominator: integral of the normalized field profile over
    the ideal window.
    """
    x = profile.x_grid
    mz = profile.mz_mean / saturation
    x1, x2 = ideal_window
    if not (x[0] <= x1 < x2 <= x[-1]):
        raise ConfigError("ideal window must lie within the track")
    hw = np.asarray(field_profile, dtype=float)
    msk = (x >= x1) & (x <= x2)
    denom = np.trapezoid(hw[msk], x[msk])

    ic = int(np.argmin(np.abs(x - 0.5 * (x1 + x2))))
    if mz[ic] <= 0.0 or denom <= 0.0:
        return SpEffResult(0.0, False, None)
    lo = ic
    while lo > 0 and mz[lo - 1] > 0.0:
        lo -= 1
    hi = ic
    while hi < len(x) - 1 and mz[hi + 1] > 0.0:
        hi += 1
    # interpolated zero crossings just outside the positive run
    x3 = x[lo]
    if lo > 0:
        x3 = x[lo] - (x[lo] - x[lo - 1]) * mz[lo] / (mz[lo] - mz[lo - 1])
    x4 = x[hi]
    if hi < len(x) - 1:
        x4 = x[hi] + (x[hi + 1] - x[hi]) * mz[hi] / (mz[hi] - mz[hi + 1])
    xs = np.concatenate([[x3], x[lo:hi + 1], [x4]])
    ys = np.concatenate([[0.0], mz[lo:hi + 1], [0.0]])
    numer = np.trapezoid(ys, xs)
    return SpEffResult(float(numer / denom), True, (float(x3), float(x4)))


# ---------------------------------------------------------------------------
# Transition alignment and medium SNR
# ---------------------------------------------------------------------------

def _zero_crossings(x, y, min_run: float):
    """Sign-change positions with linear interpolation.

    Exact zeros inherit the preceding sign, so soft transitions that sample
    0.0 still register one crossing.  A crossing counts only if the sign
    persists over at least min_run on each side (majority vote), which
    suppresses grain-noise doublets.
    """
    s = np.sign(y)
    nz = np.nonzero(s)[0]
    if len(nz) == 0:
        return []
    ff = np.where(s != 0, np.arange(len(s)), -1)
    np.maximum.accumulate(ff, out=ff)
    filled = np.where(ff >= 0, s[np.clip(ff, 0, None)], 0.0)
    idx = np.nonzero((filled[:-1] != 0) & (filled[1:] != 0)
                     & (filled[:-1] != filled[1:]))[0]
    out = []
    dx = x[1] - x[0]
    k = max(1, int(round(min_run / dx)))
    for i in idx:
        left = filled[max(0, i - k + 1):i + 1]
        right = filled[i + 1:i + 1 + k]
        if len(left) == 0 or len(right) == 0:
            continue
        if np.median(left) == np.median(right):
            continue
        if y[i + 1] == y[i]:
            xc = x[i]
        else:
            xc = x[i] - dx * y[i] / (y[i + 1] - y[i])
        out.append((float(xc), 1.0 if filled[i + 1] > filled[i] else -1.0))
    return out


def align_transitions(profiles: list[TrackProfile], bit_length: float,
                      edge_exclusion: float | None = None) -> AlignedWindows:
    """Overlay +-BL/2 windows centered on every transition of every repeat.

    Transition centers are linear-interpolated zero crossings of mz_mean;
    falling transitions are sign-flipped so all windows rise.  Mean and
    variance are pointwise across all windows and repeats.
    """
    if len(profiles) < 1:
        raise InsufficientTransitionsError("no profiles given")
    dx = float(profiles[0].x_grid[1] - profiles[0].x_grid[0])
    half = bit_length / 2.0
    xw = np.arange(-half, half + dx / 2, dx)
    edge = bit_length if edge_exclusion is None else edge_exclusion
    windows = []
    for p in profiles:
        x, y = p.x_grid, p.mz_mean
        for xc, pol in _zero_crossings(x, y, min_run=bit_length / 4.0):
            if xc < x[0] + edge or xc > x[-1] - edge:
                continue
            windows.append(pol * np.interp(xw + xc, x, y))
    if len(windows) < 2:
        raise InsufficientTransitionsError(
            f"found {len(windows)} usable transitions; need >= 2")
    w = np.asarray(windows)
    return AlignedWindows(x=xw, mean=w.mean(axis=0), var=w.var(axis=0),
                          n_windows=len(windows))


SNR_CLAMP_DB = 60.0
_NOISE_FLOOR = 1e-12


def medium_snr(aligned: AlignedWindows, bit_length: float):
    """(SNR [dB], clamped flag) over the +-BL/2 aligned window."""
    msk = (aligned.x >= -bit_length / 2.0) & (aligned.x <= bit_length / 2.0)
    sig = np.trapezoid(aligned.mean[msk] ** 2, aligned.x[msk])
    noi = np.trapezoid(aligned.var[msk], aligned.x[msk])
    if noi < _NOISE_FLOOR:
        return SNR_CLAMP_DB, True
    return float(10.0 * np.log10(sig / noi)), False


def system_snr(aligned_by_layer: list[AlignedWindows], bit_length: float):
    """Equal-weight combination: layer signal and noise integrals are summed
    before taking the ratio."""
    sig = 0.0
    noi = 0.0
    for al in aligned_by_layer:
        msk = (al.x >= -bit_length / 2.0) & (al.x <= bit_length / 2.0)
        sig += np.trapezoid(al.mean[msk] ** 2, al.x[msk])
        noi += np.trapezoid(al.var[msk], al.x[msk])
    if noi < _NOISE_FLOOR:
        return SNR_CLAMP_DB, True
    return float(10.0 * np.log10(sig / noi)), False


# ---------------------------------------------------------------------------
# Cell readback
# ---------------------------------------------------------------------------

def registration_offset(profile: TrackProfile, bit_length: float) -> float:
    """Timing recovery: mean shift of written transitions off the bit grid.

    Written transitions land a few nm off the bit-clock boundaries (the
    freeze point trails the bit clock and stray-tail rewriting shifts it
    further).  The offset is the circular mean of the crossing phases
    relative to the cell boundaries; 0.0 when the track has no transitions.
    """
    crossings = _zero_crossings(profile.x_grid, profile.mz_mean,
                                min_run=bit_length / 4.0)
    if not crossings:
        return 0.0
    phases = [2.0 * np.pi * (xc % bit_length) / bit_length
              for xc, _ in crossings]
    ang = np.angle(np.mean(np.exp(1j * np.array(phases))))
    off = bit_length * ang / (2.0 * np.pi)
    if off > bit_length / 2.0:
        off -= bit_length
    return float(off)


def read_cells(stack: MediaStack, layer: int, bit_length: float,
               offset: float | None = None, state=None,
               dx: float = 0.5) -> np.ndarray:
    """Per-cell area-weighted mean m_z; cell k spans [k BL + offset, ...).

    offset=None self-calibrates from the written transitions
    (registration_offset); pass 0.0 for raw bit-grid cells.
    """
    prof = track_profile(stack, layer, state=state, dx=dx)
    if offset is None:
        offset = registration_offset(prof, bit_length)
    n_cells = int(np.ceil(stack.track_length / bit_length))
    out = np.full(n_cells, np.nan)
    for k in range(n_cells):
        lo, hi = k * bit_length + offset, (k + 1) * bit_length + offset
        msk = (prof.x_grid >= lo) & (prof.x_grid < hi)
        if msk.any():
            out[k] = prof.mz_mean[msk].mean()
    return out


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------

@dataclass
class SingleLayerWriteSetup:
    """Template for the individual heat-assisted write experiment."""

    layer_stats: LayerStats
    head: fields.HeadSpec
    track_length: float = 300.0
    track_width: float = constants.TRACK_WIDTH_DEFAULT
    bit_length: float = constants.BIT_LENGTH_DEFAULT
    velocity: float = constants.VELOCITY_DEFAULT
    segment_cells: int = 3
    params: LlbParams = field(default_factory=LlbParams)
    window_mode: str = "segment"
    normalize: bool = True
    grid_dx: float = 0.5

    def n_cells(self):
        return int(np.ceil(self.track_length / self.bit_length))

    def segment(self):
        n = self.n_cells()
        s0 = (n - self.segment_cells) // 2
        return s0, self.segment_cells

    def build_run(self, hw: float, seed: int) -> protocol.RecordingRun:
        stack = build_stack([replace(self.layer_stats)], self.track_length,
                            self.track_width, rng.spawn_seed(seed, 101))
        s0, sl = self.segment()
        head = replace(self.head, Hw=hw,
                       bits=protocol.segment_bits(self.n_cells(), s0, sl))
        array = fields.HeadArray(heads=[head], velocity=self.velocity)
        return protocol.RecordingRun(media=stack, array=array,
                                     bit_length=self.bit_length, seed=seed,
                                     params=self.params)


def sp_for_run(setup: SingleLayerWriteSetup, result: protocol.RunResult,
               stack: MediaStack) -> SpEffResult:
    prof = track_profile(stack, 0, state=result.final_state[0],
                         dx=setup.grid_dx)
    s0, sl = setup.segment()
    off = registration_offset(prof, setup.bit_length)
    lo = s0 * setup.bit_length + off
    hi = (s0 + sl) * setup.bit_length + off
    hwprof, window = segment_field_profile(prof.x_grid, lo, hi,
                                           setup.head.fwhm_H,
                                           setup.window_mode)
    sat = saturation_level(stack, 0, setup.params) if setup.normalize else 1.0
    return sp_eff(prof, hwprof, window, saturation=sat)


def field_sweep_sp(setup: SingleLayerWriteSetup, hw_values,
                   repeats: int = 10, base_seed: int = 1):
    """SP_eff(Hw) curve averaged over repeats; returns (curve, best field).

    curve rows: (Hw, mean SP_eff, std SP_eff).
    """
    hw_values = list(hw_values)
    if not hw_values:
        raise ConfigError("empty field list")
    curve = []
    for hw in hw_values:
        runs = [setup.build_run(hw, rng.spawn_seed(base_seed, int(hw), rep))
                for rep in range(repeats)]
        results = protocol.run_batch(runs)
        vals = [sp_for_run(setup, res, run.media).value
                for res, run in zip(results, runs)]
        curve.append((float(hw), float(np.mean(vals)), float(np.std(vals))))
    best = max(curve, key=lambda row: row[1])
    return curve, best[0]


@dataclass
class DualLayerWriteSetup:
    """Template for dual-head square-wave recording (SNR experiments)."""

    layer_stats: list[LayerStats]
    heads: list[fields.HeadSpec]
    track_length: float = 400.0
    track_width: float = constants.TRACK_WIDTH_DEFAULT
    bit_length: float = constants.BIT_LENGTH_DEFAULT
    velocity: float = constants.VELOCITY_DEFAULT
    params: LlbParams = field(default_factory=LlbParams)
    grid_dx: float = 0.5

    def n_cells(self):
        return int(np.ceil(self.track_length / self.bit_length))

    def build_run(self, delta_d: float, seed: int) -> protocol.RecordingRun:
        stack = build_stack([replace(s) for s in self.layer_stats],
                            self.track_length, self.track_width,
                            rng.spawn_seed(seed, 202))
        n = self.n_cells()
        heads = []
        for k, h in enumerate(self.heads):
            heads.append(replace(
                h,
                delta_d=0.0 if k == 0 else delta_d,
                bits=protocol.square_wave_bits(n),
            ))
        array = fields.HeadArray(heads=heads, velocity=self.velocity)
        return protocol.RecordingRun(media=stack, array=array,
                                     bit_length=self.bit_length, seed=seed,
                                     params=self.params)


def layer_snrs(runs, results, setup: DualLayerWriteSetup):
    """Per-layer and system SNR from a batch of repeated runs."""
    n_layers = runs[0].media.n_layers
    aligned = []
    for li in range(n_layers):
        profs = [track_profile(run.media, li, state=res.final_state[li],
                               dx=setup.grid_dx)
                 for run, res in zip(runs, results)]
        aligned.append(align_transitions(profs, setup.bit_length))
    snrs = [medium_snr(al, setup.bit_length) for al in aligned]
    sys_db, sys_cl = system_snr(aligned, setup.bit_length)
    return snrs, (sys_db, sys_cl)


def sweep_delta_d(setup: DualLayerWriteSetup, delta_d_values,
                  repeats: int = 10, base_seed: int = 1,
                  point_runner=None) -> SweepResult:
    """Medium SNR versus head spacing; returns the curve and its argmax.

    point_runner(setup, delta_d, repeats, base_seed) may be supplied to
    dispatch points to a worker pool; it must return (snrs, system).
    """
    values = list(delta_d_values)
    if not values:
        raise ConfigError("empty delta_d list")
    runner = point_runner or run_delta_d_point
    points = []
    for dd in values:
        snrs, system = runner(setup, dd, repeats, base_seed)
        points.append(SweepPoint(
            delta_d=float(dd),
            snr_top=snrs[0][0],
            snr_bottom=snrs[-1][0],
            snr_system=system[0],
            clamped=any(c for _, c in snrs) or system[1],
        ))
    best = max(range(len(points)), key=lambda i: points[i].snr_system)
    return SweepResult(points=points, delta_d_opt=points[best].delta_d,
                       snr_max=points[best].snr_system)


def run_delta_d_point(setup: DualLayerWriteSetup, delta_d: float,
                      repeats: int, base_seed: int):
    """One sweep point: `repeats` media/noise realizations as one batch."""
    runs = [setup.build_run(delta_d, rng.spawn_seed(base_seed, int(delta_d * 10), rep))
            for rep in range(repeats)]
    results = protocol.run_batch(runs)
    return layer_snrs(runs, results, setup)


def brute_force_argmax(points: list[SweepPoint]) -> float:
    return max(points, key=lambda p: p.snr_system).delta_d
