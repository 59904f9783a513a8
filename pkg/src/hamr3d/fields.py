"""Moving multi-head temperature and applied-field profiles.

Geometry convention (see also the protocol module): the head array moves in
+x at velocity v.  The first head in the array is the hottest and leads;
head i trails the lead pole by the accumulated spacing S_i = D_i - d_i.
Within each head the laser spot leads its own write pole by d_i, so a grain
is heated just before the pole field freezes it during cooling.

Profile shapes: the writing temperature of each head is Gaussian around the
laser peak; the total temperature is the scalar sum of all head excesses
plus the environment.  The writing field is constant over the pole footprint
and decays as a Gaussian of the distance to the nearer pole edge outside;
the total field is the vector sum.  A bit flip ramps the head amplitude
linearly over the ramp time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import constants
from .errors import ConfigError
from .llb import HeadKinematics


@dataclass
class HeadSpec:
    """Thermal, field, and geometric parameters of one write head."""

    Tw: float                       # writing temperature, K
    Hw: float                       # writing field, Oe
    fwhm_T: float = 20.0            # nm
    fwhm_H: float = 20.0            # nm
    head_width: float = 20.0        # nm, down-track pole extent
    u_hat: tuple = (0.0, 0.0, 1.0)  # field direction
    d: float = 1.0                  # nm, laser-to-pole distance
    delta_d: float = 0.0            # nm, spacing to the previous head
    ramp_time: float = 0.1          # ns
    bits: np.ndarray = field(default_factory=lambda: np.array([1], dtype=np.int8))

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.int8)

    @property
    def sigma_t(self) -> float:
        return self.fwhm_T * constants.FWHM_TO_SIGMA

    @property
    def sigma_h(self) -> float:
        return self.fwhm_H * constants.FWHM_TO_SIGMA

    def validate(self, laser_on: bool = True):
        if laser_on and self.Tw <= constants.T_ENV_DEFAULT:
            raise ConfigError(f"writing temperature {self.Tw} K must exceed 300 K")
        if self.Hw < 0:
            raise ConfigError("writing field must be >= 0")
        for name in ("fwhm_T", "fwhm_H", "head_width"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if abs(np.linalg.norm(self.u_hat) - 1.0) > 1e-9:
            raise ConfigError("u_hat must be a unit vector")
        if self.delta_d < 0:
            raise ConfigError("delta_d must be >= 0")
        if self.ramp_time < 0:
            raise ConfigError("ramp_time must be >= 0")
        if len(self.bits) == 0 or not np.all(np.isin(self.bits, (-1, 1))):
            raise ConfigError("bits must be a non-empty +/-1 sequence")
        return self


@dataclass
class HeadArray:
    """Ordered head list (pass order, hottest first) with kinematics."""

    heads: list[HeadSpec]
    velocity: float                      # m/s == nm/ns
    t_env: float = constants.T_ENV_DEFAULT
    laser_on: bool = True

    def __post_init__(self):
        if not self.heads:
            raise ConfigError("head array must contain at least one head")
        if self.velocity <= 0:
            raise ConfigError("velocity must be positive")
        for h in self.heads:
            h.validate(self.laser_on)
        if self.heads[0].delta_d != 0.0:
            raise ConfigError("delta_d of the first head must be 0")
        if self.laser_on:
            tws = [h.Tw for h in self.heads]
            if any(nxt >= prev for prev, nxt in zip(tws[:-1], tws[1:])):
                raise ConfigError(
                    "writing temperatures must be strictly descending in pass "
                    f"order (Tw(1) > Tw(2) > ... > Tw(N)); got {tws}")
        for i, h in enumerate(self.heads[1:], start=1):
            if h.delta_d < max(h.head_width, self.heads[i - 1].head_width):
                warnings.warn(
                    f"pole footprints of heads {i} and {i + 1} overlap "
                    f"(delta_d = {h.delta_d} nm)", stacklevel=2)

    @property
    def n_heads(self) -> int:
        return len(self.heads)

    def validate_against_media(self, stack):
        """Each head must write its assigned layer: Tw_i > median Tc."""
        if self.n_heads != stack.n_layers:
            raise ConfigError(
                f"{self.n_heads} heads cannot address {stack.n_layers} layers")
        if not self.laser_on:
            return self
        for k, head in enumerate(self.heads):
            layer = stack.n_layers - 1 - k   # pass k writes layer N-1-k
            tc_med = stack.median_tc(layer)
            if head.Tw <= tc_med:
                raise ConfigError(
                    f"head {k + 1} writing temperature {head.Tw} K does not "
                    f"exceed the median Tc {tc_med:.1f} K of layer {layer}")
        return self


@dataclass
class FieldSample:
    T: float
    H: np.ndarray


# ---------------------------------------------------------------------------
# Offsets and positions
# ---------------------------------------------------------------------------

def head_offsets(array: HeadArray) -> np.ndarray:
    """Laser-position supplements D_i: D_1 = d_1, D_i = d_i + sum(delta_d)."""
    d = np.array([h.d for h in array.heads])
    dd = np.array([h.delta_d for h in array.heads])
    out = d.copy()
    out[1:] += np.cumsum(dd)[1:]
    return out


def pole_offsets(array: HeadArray) -> np.ndarray:
    """Trailing offsets S_i = D_i - d_i of each pole behind the lead pole."""
    return head_offsets(array) - np.array([h.d for h in array.heads])


def pole_position(array: HeadArray, i: int, t) -> np.ndarray:
    """Pole center of head i (0-based) at time t [nm]."""
    return array.velocity * np.asarray(t, dtype=float) - pole_offsets(array)[i]


def laser_position(array: HeadArray, i: int, t) -> np.ndarray:
    return pole_position(array, i, t) + array.heads[i].d


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def temperature_at(x, t, array: HeadArray):
    """Temperature [K] at down-track position(s) x and time t."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x, dtype=float)
    if array.laser_on:
        for i, head in enumerate(array.heads):
            u = x - laser_position(array, i, t)
            total = total + (head.Tw - array.t_env) * np.exp(
                -u ** 2 / (2.0 * head.sigma_t ** 2))
    out = total + array.t_env
    return out if out.ndim else float(out)


def bit_at(head: HeadSpec, t, v: float, bit_length: float,
           offset: float = 0.0) -> int:
    """Current raw bit of a head: sequence entry indexed by how many bit
    cells the pole trailing edge has traversed (held at the ends)."""
    if bit_length <= 0:
        raise ConfigError("bit_length must be positive")
    xe = v * t - offset - head.head_width / 2.0
    k = int(np.floor(xe / bit_length))
    return int(head.bits[min(max(k, 0), len(head.bits) - 1)])


def effective_bit(head: HeadSpec, t, v: float, bit_length: float,
                  offset: float = 0.0) -> float:
    """Signed bit amplitude including the linear flip ramp."""
    xe = v * t - offset - head.head_width / 2.0
    k = int(np.floor(xe / bit_length))
    kc = min(max(k, 0), len(head.bits) - 1)
    b_cur = float(head.bits[kc])
    b_prev = float(head.bits[max(kc - 1, 0)])
    if b_cur == b_prev or head.ramp_time == 0.0:
        return b_cur
    t_entry = (kc * bit_length + offset + head.head_width / 2.0) / v
    frac = min(max((t - t_entry) / head.ramp_time, 0.0), 1.0)
    return b_prev + (b_cur - b_prev) * frac


def field_at(x, t, array: HeadArray, current_bits=None,
             bit_length: float = constants.BIT_LENGTH_DEFAULT):
    """Applied field 3-vector(s) [Oe] at position(s) x and time t.

    With current_bits=None each head uses its own bit sequence including
    flip ramps; an explicit per-head +/-1 list overrides (no ramp).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    H = np.zeros((len(x), 3))
    soff = pole_offsets(array)
    for i, head in enumerate(array.heads):
        if current_bits is None:
            b = effective_bit(head, t, array.velocity, bit_length, soff[i])
        else:
            b = float(current_bits[i])
        pole = array.velocity * t - soff[i]
        up = x - pole
        w = head.head_width / 2.0
        dist = np.maximum(np.abs(up) - w, 0.0)
        g = np.exp(-dist ** 2 / (2.0 * head.sigma_h ** 2))
        H += (b * head.Hw * g)[:, None] * np.asarray(head.u_hat, dtype=float)
    return H if len(H) > 1 else H[0]


def sample(x, t, array: HeadArray,
           bit_length: float = constants.BIT_LENGTH_DEFAULT) -> FieldSample:
    return FieldSample(T=temperature_at(x, t, array),
                       H=field_at(x, t, array, bit_length=bit_length))


# ---------------------------------------------------------------------------
# Kinematics assembly for the integrator
# ---------------------------------------------------------------------------

def make_kinematics(arrays: list[HeadArray], bit_length: float,
                    n_cells: int) -> HeadKinematics:
    """Build batched head kinematics from per-run head arrays.

    All arrays must share head count, geometry, and velocity; per-run
    temperature and field amplitudes (and bit sequences) may differ.
    """
    ref = arrays[0]
    nh = ref.n_heads
    for a in arrays:
        if a.n_heads != nh or a.velocity != ref.velocity:
            raise ConfigError("batched runs must share head count and velocity")
    soff = np.array([pole_offsets(a) for a in arrays])
    hw = np.array([[h.Hw for h in a.heads] for a in arrays])
    tw = np.array([[max(h.Tw - a.t_env, 0.0) if a.laser_on else 0.0
                    for h in a.heads] for a in arrays])
    nb = max(max(len(h.bits) for h in a.heads) for a in arrays)
    nb = max(nb, n_cells)
    bits = np.empty((len(arrays), nh, nb), dtype=np.int8)
    for r, a in enumerate(arrays):
        for h, head in enumerate(a.heads):
            seq = np.asarray(head.bits, dtype=np.int8)
            pad = np.full(nb - len(seq), seq[-1], dtype=np.int8)
            bits[r, h] = np.concatenate([seq, pad])
    return HeadKinematics(
        v=ref.velocity,
        soff=soff,
        dlead=np.array([h.d for h in ref.heads]),
        half_w=np.array([h.head_width / 2.0 for h in ref.heads]),
        sigma_t=np.array([h.sigma_t for h in ref.heads]),
        sigma_h=np.array([h.sigma_h for h in ref.heads]),
        uhat=np.array([h.u_hat for h in ref.heads], dtype=float),
        hw=hw,
        tw_exc=tw,
        bits=bits,
        ramp_time=np.array([h.ramp_time for h in ref.heads]),
        bit_length=bit_length,
        t_env=ref.t_env,
    )


def profile_table(array: HeadArray, t: float, x_grid) -> np.ndarray:
    """(x, T, Hx, Hy, Hz) rows for profile dumps and plotting."""
    x = np.asarray(x_grid, dtype=float)
    T = temperature_at(x, t, array)
    H = np.atleast_2d(field_at(x, t, array))
    return np.column_stack([x, T, H])
