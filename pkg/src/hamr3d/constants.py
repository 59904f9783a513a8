"""Physical constants (CGS) and the default material / head parameter set.

Unit conventions used throughout the package:
    length      nm
    time        ns
    field       Oe
    magnetization   emu/cc
    anisotropy  erg/cc
    temperature K
Velocities in m/s are numerically identical to nm/ns, so no conversion is
ever applied to `v`.
"""

from __future__ import annotations

# Electron gyromagnetic ratio [rad / (s Oe)]
GAMMA_E = 1.76e7

# Boltzmann constant [erg / K]
K_B = 1.380649e-16

# Gaussian FWHM -> standard deviation
import math

FWHM_TO_SIGMA = 1.0 / math.sqrt(8.0 * math.log(2.0))

# Ambient temperature [K]
T_ENV_DEFAULT = 300.0

# ---------------------------------------------------------------------------
# Default dual-layer FePt medium (layer 0 = top, nearest the heads)
# ---------------------------------------------------------------------------

TOP_LAYER = dict(
    Ms0_mean=487.0,          # emu/cc at 0 K
    Tc_mean=526.0,           # K (log-normal median)
    sigma_Tc=0.03,
    Ku0_mean=6.0e6,          # erg/cc at 0 K (log-normal median)
    sigma_Ku=0.15,
    thickness=6.0,           # nm
    grain_diameter_mean=6.0, # nm
    sigma_volume=0.09,
)

BOTTOM_LAYER = dict(
    Ms0_mean=696.0,
    Tc_mean=620.0,
    sigma_Tc=0.03,
    Ku0_mean=25.0e6,
    sigma_Ku=0.15,
    thickness=6.0,
    grain_diameter_mean=6.0,
    sigma_volume=0.09,
)

# ---------------------------------------------------------------------------
# Default head array (pass order: hottest head first, writes the bottom layer)
# ---------------------------------------------------------------------------

HEAD_BOTTOM = dict(
    Tw=680.0,          # K
    fwhm_T=20.0,       # nm
    Hw=13000.0,        # Oe, optimal operating point for the bottom layer
    fwhm_H=20.0,       # nm
    head_width=20.0,   # nm
    u_hat=(0.0, 0.0, 1.0),
    d=1.0,             # nm, laser leads its pole by this distance
    delta_d=0.0,       # nm, spacing to previous head (lead head: 0)
    ramp_time=0.1,     # ns
)

HEAD_TOP = dict(
    Tw=540.0,
    fwhm_T=20.0,
    Hw=13100.0,        # Oe, optimal operating point for the top layer
    fwhm_H=20.0,
    head_width=20.0,
    u_hat=(0.0, 0.0, 1.0),
    d=1.0,
    delta_d=35.0,      # nm, clean-write head spacing at v = 5 m/s, BL = 20 nm
    ramp_time=0.1,
)

# ---------------------------------------------------------------------------
# Dynamics defaults
# ---------------------------------------------------------------------------

DAMPING = 0.1          # bath-coupling constant lambda
ETA = 2.0              # Callen-Callen exponent, K(T) = K(0) m(T)^eta
BETA_ME = 0.365        # critical exponent of m_e(T) = (1 - T/Tc)^beta
EPSILON_M = 1.0e-3     # magnetization-length floor
DT_DEFAULT = 1.0e-5    # ns (10 fs)

# Longitudinal-susceptibility closure: chi_par(T) = beta * tau^(beta-1) / CHI_FIELD
# below Tc (tau = 1 - T/Tc, clamped at TAU_CLAMP), Curie-Weiss decay above.
# CHI_FIELD is the mean-field exchange-field amplitude ~ 3 kB Tc / mu_atom.
CHI_FIELD = 1.6e7      # Oe
TAU_CLAMP = 0.002

# Activity-window defaults for the integrator (grains outside the window are
# thermally blocked on recording timescales and are not advanced).
T_ACTIVATE = 340.0     # K
SETTLE_TIME = 0.3      # ns a grain stays integrated after leaving the window
FIELD_RISK_BARRIER = 11.0   # kB T units; lower barrier => field-activated

TRACK_LENGTH_DEFAULT = 600.0   # nm
TRACK_WIDTH_DEFAULT = 60.0     # nm
BIT_LENGTH_DEFAULT = 20.0      # nm
VELOCITY_DEFAULT = 5.0         # m/s
