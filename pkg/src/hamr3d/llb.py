"""Stochastic Landau-Lifshitz-Bloch dynamics for grain macrospins.

The magnetization of every grain follows

    dm/dt = -gamma (m x H_eff)
            + gamma a_par (m . H_eff) m / m^2
            - gamma a_perp [m x (m x (H_eff + zeta_perp))] / m^2
            + zeta_ad

with temperature-dependent damping, anisotropy and longitudinal-restoring
closures, integrated with a stochastic Heun (predictor-corrector) scheme.
Noise is drawn once per step and held through predictor and corrector
(Stratonovich-consistent).

Two implementations coexist: exact vectorized closures (public API, used by
tests and state initialization) and a fused numba kernel with interpolation
tables (production integrator).  A regression test pins the table accuracy
against the exact forms.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from . import constants, rng
from .errors import ConfigError, IntegratorInstabilityError

_NT = 8192  # closure-table resolution on the q = tau^(1/4) grid


@dataclass
class LlbParams:
    """Integrator and closure constants."""

    gamma_e: float = constants.GAMMA_E       # rad / (s Oe)
    damping: float = constants.DAMPING       # bath coupling lambda
    eta: float = constants.ETA               # K(T) = K(0) m_e^eta
    beta_me: float = constants.BETA_ME       # m_e = (1 - T/Tc)^beta
    dt: float = constants.DT_DEFAULT         # ns
    epsilon_m: float = constants.EPSILON_M
    chi_field: float = constants.CHI_FIELD   # Oe, susceptibility amplitude
    tau_clamp: float = constants.TAU_CLAMP
    t_env: float = constants.T_ENV_DEFAULT
    noise: bool = True
    # Activity window: grains whose estimated peak temperature stays below
    # t_activate and whose local field stays below their risk threshold are
    # thermally blocked on recording timescales and are not advanced.
    active_window: bool = True
    t_activate: float = constants.T_ACTIVATE
    settle_time: float = constants.SETTLE_TIME          # ns
    risk_barrier: float = constants.FIELD_RISK_BARRIER  # kB T units
    # Field-risk activation applies only inside the thermally perturbed zone;
    # ambient-temperature activated reversal (retention) is out of scope.
    field_t_floor: float = 320.0
    chunk_steps: int = 1024

    def validate(self) -> "LlbParams":
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise ConfigError("damping must be in (0, 1]")
        if self.eta <= 0:
            raise ConfigError("eta must be positive")
        if not (0.0 < self.beta_me < 1.0):
            raise ConfigError("beta_me must be in (0, 1)")
        if self.chunk_steps < 2:
            raise ConfigError("chunk_steps must be >= 2")
        return self


# ---------------------------------------------------------------------------
# Exact material closures (public API)
# ---------------------------------------------------------------------------

def equilibrium_magnetization(T, Tc, beta=constants.BETA_ME,
                              eps=constants.EPSILON_M):
    """m_e(T): Curie-Bloch (1 - T/Tc)^beta below Tc, floored at eps."""
    T = np.asarray(T, dtype=float)
    Tc = np.asarray(Tc, dtype=float)
    tau = 1.0 - T / Tc
    me = np.where(tau > 0.0, np.power(np.clip(tau, 0.0, None), beta), eps)
    me = np.maximum(me, eps)
    return me if me.ndim else float(me)


def anisotropy_constant(T, Ku0, Tc, eta=constants.ETA,
                        beta=constants.BETA_ME, eps=constants.EPSILON_M):
    """K_u(T) = K_u(0) m_e(T)^eta (Callen-Callen scaling)."""
    me = equilibrium_magnetization(T, Tc, beta, eps)
    return Ku0 * np.power(me, eta)


def damping_coefficients(T, Tc, lam=constants.DAMPING):
    """Longitudinal and transverse damping (alpha_par, alpha_perp)."""
    T = np.asarray(T, dtype=float)
    Tc = np.asarray(Tc, dtype=float)
    a_par = lam * (2.0 * T / (3.0 * Tc))
    a_perp = np.where(T < Tc, lam * (1.0 - T / (3.0 * Tc)), a_par)
    if a_par.ndim:
        return a_par, a_perp
    return float(a_par), float(a_perp)


def longitudinal_susceptibility(T, Tc, beta=constants.BETA_ME,
                                chi_field=constants.CHI_FIELD,
                                tau_clamp=constants.TAU_CLAMP):
    """Reduced longitudinal susceptibility dm/dH [1/Oe], clamped near Tc.

    Below Tc this is the analytic field derivative of the field-extended
    Curie-Bloch form m(T, H) = (1 - T/Tc + H/chi_field)^beta; above Tc a
    Curie-Weiss decay with the same amplitude.
    """
    T = np.asarray(T, dtype=float)
    Tc = np.asarray(Tc, dtype=float)
    tau = 1.0 - T / Tc
    below = beta * np.power(np.maximum(tau, tau_clamp), beta - 1.0) / chi_field
    above = beta / (chi_field * (np.maximum(-tau, 0.0) + tau_clamp))
    chi = np.where(tau > 0.0, below, above)
    return chi if chi.ndim else float(chi)


def anisotropy_field_scale(T, Ku0, Ms0, Tc, eta=constants.ETA,
                           beta=constants.BETA_ME, eps=constants.EPSILON_M):
    """Anisotropy stiffness field 2 K_u(T) / (Ms0 m_e(T)^2) [Oe].

    Inverse transverse susceptibility of the LLB free energy; its energy
    integral over orientation reproduces the barrier K_u(T) V sin^2(theta).
    For eta = 2 it is the constant 2 Ku0 / Ms0.
    """
    me = equilibrium_magnetization(T, Tc, beta, eps)
    return 2.0 * anisotropy_constant(T, Ku0, Tc, eta, beta, eps) / (Ms0 * me ** 2)


def switching_field(T, Ku0, Ms0, Tc, eta=constants.ETA,
                    beta=constants.BETA_ME, eps=constants.EPSILON_M):
    """Static Stoner-Wohlfarth reversal threshold 2 K_u(T) / (Ms0 m_e(T))."""
    me = equilibrium_magnetization(T, Tc, beta, eps)
    return 2.0 * anisotropy_constant(T, Ku0, Tc, eta, beta, eps) / (Ms0 * me)


def longitudinal_field(m, T, Tc, params: LlbParams | None = None):
    """Length-restoring field H_long [Oe]; vectorized over the leading axis."""
    p = params or LlbParams()
    m = np.atleast_2d(np.asarray(m, dtype=float))
    T = np.broadcast_to(np.asarray(T, dtype=float), m.shape[:1])
    Tc = np.broadcast_to(np.asarray(Tc, dtype=float), m.shape[:1])
    tau = 1.0 - T / Tc
    m2 = np.einsum("ij,ij->i", m, m)
    me = equilibrium_magnetization(T, Tc, p.beta_me, p.epsilon_m)
    me_hl = np.maximum(me, p.tau_clamp ** p.beta_me)
    chi = longitudinal_susceptibility(T, Tc, p.beta_me, p.chi_field, p.tau_clamp)
    hl_below = (0.5 / (chi * me_hl ** 2)) * (me_hl ** 2 - m2)
    hl_above = -1.0 / chi
    return np.where(tau > 0.0, hl_below, hl_above)


def effective_field(m, easy_axis, T, Tc, Ku0, Ms0, h_applied,
                    params: LlbParams | None = None):
    """Total effective field H_eff = H_applied + H_anis + H_long [Oe].

    The anisotropy field is the transverse-projection form
    -(2 K_u / (Ms0 m_e^2)) (m - (m.e)e); the longitudinal field restores
    |m| toward m_e below Tc and relaxes it toward zero above.
    """
    p = params or LlbParams()
    m = np.atleast_2d(np.asarray(m, dtype=float))
    e = np.atleast_2d(np.asarray(easy_axis, dtype=float))
    h = np.atleast_2d(np.asarray(h_applied, dtype=float))
    n = m.shape[0]
    T = np.broadcast_to(np.asarray(T, dtype=float), (n,))
    Tc = np.broadcast_to(np.asarray(Tc, dtype=float), (n,))
    Ku0 = np.broadcast_to(np.asarray(Ku0, dtype=float), (n,))
    Ms0 = np.broadcast_to(np.asarray(Ms0, dtype=float), (n,))

    pref = anisotropy_field_scale(T, Ku0, Ms0, Tc, p.eta, p.beta_me, p.epsilon_m)
    mdote = np.einsum("ij,ij->i", m, e)
    h_anis = np.atleast_1d(pref)[:, None] * (mdote[:, None] * e - m)
    hl = longitudinal_field(m, T, Tc, p)
    return h + h_anis + hl[:, None] * m


# ---------------------------------------------------------------------------
# Closure tables for the kernel (q = tau^(1/4) grid)
# ---------------------------------------------------------------------------

def build_tables(p: LlbParams) -> np.ndarray:
    q = np.linspace(0.0, 1.0, _NT)
    tau = q ** 4
    me = np.maximum(tau ** p.beta_me, p.epsilon_m)
    me_hl = np.maximum(me, p.tau_clamp ** p.beta_me)
    i2c = (0.5 * p.chi_field / p.beta_me
           * np.maximum(tau, p.tau_clamp) ** (1.0 - p.beta_me))
    a_long = i2c / me_hl ** 2          # H_long = a_long * (me_hl^2 - m^2)
    pw = me ** (p.eta - 2.0)           # anisotropy prefactor factor
    return np.ascontiguousarray(np.stack([me, me_hl ** 2, a_long, pw]))


# ---------------------------------------------------------------------------
# Fused Heun kernel
# ---------------------------------------------------------------------------

@njit(cache=True, fastmath=True, error_model="numpy", inline="always")
def _materials(T, tcg, tabs, lam, chi_co, tau_clamp):
    """(me_hl2, a_long, pw, a_par, a_perp, hl_above) at temperature T."""
    tau = 1.0 - T / tcg
    a_par = lam * 2.0 * T / (3.0 * tcg)
    if tau > 0.0:
        qf = tau ** 0.25 * (_NT - 1)
        i = int(qf)
        if i >= _NT - 1:
            i = _NT - 2
        fr = qf - i
        mh2 = tabs[1, i] + fr * (tabs[1, i + 1] - tabs[1, i])
        al = tabs[2, i] + fr * (tabs[2, i + 1] - tabs[2, i])
        pw = tabs[3, i] + fr * (tabs[3, i + 1] - tabs[3, i])
        a_perp = lam * (1.0 - T / (3.0 * tcg))
        return mh2, al, pw, a_par, a_perp, 0.0
    hla = -chi_co * ((-tau) + tau_clamp)
    return tabs[1, 0], 0.0, tabs[3, 0], a_par, a_par, hla


@njit(cache=True, fastmath=True, error_model="numpy")
def _heun_chunk(m, x, tcg, ani0, ez, spc, sac, hstat, runi, noise,
                pole_x, beff, hw, uhat, tw_exc, sig_t2, sig_h2, half_w,
                dlead, tcut, hcut, tenv, dt_s, gamma, lam, chi_co, tau_clamp,
                eps2, tabs, s0, s1, bad):
    """Advance the gathered grains over steps [s0, s1) of the chunk.

    pole_x (R, H, S+1): pole center positions; the laser leads by dlead[h].
    beff   (R, H, S+1): signed bit amplitude including ramps.
    noise  (S, G, 6):   unit normals (float32).
    """
    G = m.shape[0]
    H = uhat.shape[0]
    for s in range(s0, s1):
        for g in range(G):
            r = runi[g]
            xg = x[g]
            mx = m[g, 0]; my = m[g, 1]; mz = m[g, 2]
            ex = ez[g, 0]; ey = ez[g, 1]; ezz = ez[g, 2]

            T0 = tenv; T1 = tenv
            h0x = hstat[g, 0]; h0y = hstat[g, 1]; h0z = hstat[g, 2]
            h1x = h0x; h1y = h0y; h1z = h0z
            for h in range(H):
                p0 = pole_x[r, h, s]; p1 = pole_x[r, h, s + 1]
                u0 = xg - (p0 + dlead[h]); u1 = xg - (p1 + dlead[h])
                if u0 * u0 < tcut[h]:
                    T0 += tw_exc[r, h] * np.exp(-u0 * u0 / sig_t2[h])
                if u1 * u1 < tcut[h]:
                    T1 += tw_exc[r, h] * np.exp(-u1 * u1 / sig_t2[h])
                w = half_w[h]
                up = xg - p0
                if up > w:
                    dd = up - w
                    g0 = np.exp(-dd * dd / sig_h2[h]) if dd * dd < hcut[h] else 0.0
                elif up < -w:
                    dd = up + w
                    g0 = np.exp(-dd * dd / sig_h2[h]) if dd * dd < hcut[h] else 0.0
                else:
                    g0 = 1.0
                up = xg - p1
                if up > w:
                    dd = up - w
                    g1 = np.exp(-dd * dd / sig_h2[h]) if dd * dd < hcut[h] else 0.0
                elif up < -w:
                    dd = up + w
                    g1 = np.exp(-dd * dd / sig_h2[h]) if dd * dd < hcut[h] else 0.0
                else:
                    g1 = 1.0
                a0 = beff[r, h, s] * hw[r, h] * g0
                a1 = beff[r, h, s + 1] * hw[r, h] * g1
                h0x += a0 * uhat[h, 0]; h0y += a0 * uhat[h, 1]; h0z += a0 * uhat[h, 2]
                h1x += a1 * uhat[h, 0]; h1y += a1 * uhat[h, 1]; h1z += a1 * uhat[h, 2]

            # predictor at (m, T0, H0)
            mh2, al, pw, apar, aperp, hla = _materials(
                T0, tcg[g], tabs, lam, chi_co, tau_clamp)
            m2 = mx * mx + my * my + mz * mz
            hl = al * (mh2 - m2) if al != 0.0 else hla
            # keep the longitudinal relaxation rate resolvable at this dt
            if apar > 0.0:
                cap = 0.9 / (gamma * dt_s * apar)
                if hl > cap:
                    hl = cap
                elif hl < -cap:
                    hl = -cap
            pref = ani0[g] * pw
            mde = mx * ex + my * ey + mz * ezz
            Hx = h0x + pref * (mde * ex - mx) + hl * mx
            Hy = h0y + pref * (mde * ey - my) + hl * my
            Hz = h0z + pref * (mde * ezz - mz) + hl * mz
            ddv = aperp - apar
            if ddv < 0.0:
                ddv = 0.0
            sigp = spc[g] * np.sqrt(T0 * ddv) / aperp if aperp > 0.0 else 0.0
            siga = sac[g] * np.sqrt(T0 * apar)
            zx = sigp * noise[s, g, 0]; zy = sigp * noise[s, g, 1]; zz = sigp * noise[s, g, 2]
            nax = siga * noise[s, g, 3]; nay = siga * noise[s, g, 4]; naz = siga * noise[s, g, 5]
            px = Hx + zx; py = Hy + zy; pz = Hz + zz
            cx = my * pz - mz * py; cy = mz * px - mx * pz; cz = mx * py - my * px
            ccx = my * cz - mz * cy; ccy = mz * cx - mx * cz; ccz = mx * cy - my * cx
            c0x = my * Hz - mz * Hy; c0y = mz * Hx - mx * Hz; c0z = mx * Hy - my * Hx
            mdh = mx * Hx + my * Hy + mz * Hz
            f = gamma / m2
            k1x = -gamma * c0x + f * apar * mdh * mx - f * aperp * ccx + nax
            k1y = -gamma * c0y + f * apar * mdh * my - f * aperp * ccy + nay
            k1z = -gamma * c0z + f * apar * mdh * mz - f * aperp * ccz + naz

            qx = mx + k1x * dt_s; qy = my + k1y * dt_s; qz = mz + k1z * dt_s

            # corrector at (m*, T1, H1), same noise values
            mh2, al, pw, apar, aperp, hla = _materials(
                T1, tcg[g], tabs, lam, chi_co, tau_clamp)
            m2 = qx * qx + qy * qy + qz * qz
            hl = al * (mh2 - m2) if al != 0.0 else hla
            if apar > 0.0:
                cap = 0.9 / (gamma * dt_s * apar)
                if hl > cap:
                    hl = cap
                elif hl < -cap:
                    hl = -cap
            pref = ani0[g] * pw
            mde = qx * ex + qy * ey + qz * ezz
            Hx = h1x + pref * (mde * ex - qx) + hl * qx
            Hy = h1y + pref * (mde * ey - qy) + hl * qy
            Hz = h1z + pref * (mde * ezz - qz) + hl * qz
            ddv = aperp - apar
            if ddv < 0.0:
                ddv = 0.0
            sigp = spc[g] * np.sqrt(T1 * ddv) / aperp if aperp > 0.0 else 0.0
            siga = sac[g] * np.sqrt(T1 * apar)
            zx = sigp * noise[s, g, 0]; zy = sigp * noise[s, g, 1]; zz = sigp * noise[s, g, 2]
            nax = siga * noise[s, g, 3]; nay = siga * noise[s, g, 4]; naz = siga * noise[s, g, 5]
            px = Hx + zx; py = Hy + zy; pz = Hz + zz
            cx = qy * pz - qz * py; cy = qz * px - qx * pz; cz = qx * py - qy * px
            ccx = qy * cz - qz * cy; ccy = qz * cx - qx * cz; ccz = qx * cy - qy * cx
            c0x = qy * Hz - qz * Hy; c0y = qz * Hx - qx * Hz; c0z = qx * Hy - qy * Hx
            mdh = qx * Hx + qy * Hy + qz * Hz
            f = gamma / m2
            k2x = -gamma * c0x + f * apar * mdh * qx - f * aperp * ccx + nax
            k2y = -gamma * c0y + f * apar * mdh * qy - f * aperp * ccy + nay
            k2z = -gamma * c0z + f * apar * mdh * qz - f * aperp * ccz + naz

            nx = mx + 0.5 * dt_s * (k1x + k2x)
            ny = my + 0.5 * dt_s * (k1y + k2y)
            nz = mz + 0.5 * dt_s * (k1z + k2z)
            n2 = nx * nx + ny * ny + nz * nz
            if n2 < eps2:
                if n2 > 0.0:
                    sc = np.sqrt(eps2 / n2)
                    nx *= sc; ny *= sc; nz *= sc
                else:
                    nx = 0.0; ny = 0.0; nz = np.sqrt(eps2)
            elif n2 > 1.44 or n2 != n2:
                if bad[0] == 0.0:
                    bad[0] = 1.0
                    bad[1] = g
                    bad[2] = n2
            m[g, 0] = nx; m[g, 1] = ny; m[g, 2] = nz


# ---------------------------------------------------------------------------
# Ensembles and head kinematics
# ---------------------------------------------------------------------------

@dataclass
class GrainEnsemble:
    """Struct-of-arrays over the grains of one or more batched runs."""

    x: np.ndarray            # (G,) down-track grain centers [nm]
    m: np.ndarray            # (G, 3) reduced magnetization
    tc: np.ndarray           # (G,) Curie temperatures [K]
    ani0: np.ndarray         # (G,) 2 Ku0 / Ms0 [Oe]
    ez: np.ndarray           # (G, 3) easy axes
    ms_v: np.ndarray         # (G,) Ms0 * V [emu]
    e_ratio: np.ndarray      # (G,) K_u(300K) V / kB 300K
    hsw300: np.ndarray       # (G,) switching field at 300 K [Oe]
    gid: np.ndarray          # (G,) per-run grain id (noise keying)
    run: np.ndarray          # (G,) int32 run index
    run_seeds: np.ndarray    # (R,)
    h_static: np.ndarray     # (G, 3) static applied field [Oe]

    @property
    def n(self) -> int:
        return len(self.x)


def ensemble_from_stacks(stacks, run_seeds, params: LlbParams,
                         h_static=None) -> GrainEnsemble:
    """Concatenate the grains of each run's MediaStack into one ensemble.

    Grain states alias the stacks' state arrays is NOT guaranteed; callers
    read results back via ``scatter_state``.
    """
    cols = {k: [] for k in ("x", "tc", "ku", "ms", "mv", "gid", "run")}
    ez_rows, m_rows = [], []
    for r, stack in enumerate(stacks):
        off = 0
        for li in range(stack.n_layers):
            grains = stack.grains(li)
            cols["x"].append([g.center[0] for g in grains])
            cols["tc"].append([g.Tc for g in grains])
            cols["ku"].append([g.Ku0 for g in grains])
            cols["ms"].append([g.Ms0 for g in grains])
            cols["mv"].append([g.Ms0 * g.volume * 1e-21 for g in grains])
            cols["gid"].append(np.arange(off, off + len(grains)))
            cols["run"].append(np.full(len(grains), r, dtype=np.int32))
            ez_rows.append(np.asarray([g.easy_axis for g in grains], dtype=float))
            m_rows.append(np.asarray(stack.state[li], dtype=float))
            off += len(grains)

    def cat(key, dtype=float):
        return np.concatenate([np.asarray(v, dtype=dtype) for v in cols[key]])

    x = cat("x"); tc = cat("tc"); ku = cat("ku"); ms = cat("ms")
    ms_v = cat("mv")
    gid = cat("gid", np.int64)
    run = cat("run", np.int32)
    ez = np.vstack(ez_rows)
    m = np.vstack(m_rows)

    t0 = params.t_env
    ku300 = anisotropy_constant(t0, ku, tc, params.eta, params.beta_me,
                                params.epsilon_m)
    vol_cc = ms_v / ms
    e_ratio = ku300 * vol_cc / (constants.K_B * t0)
    hsw = switching_field(t0, ku, ms, tc, params.eta, params.beta_me,
                          params.epsilon_m)
    if h_static is None:
        hs = np.zeros((len(x), 3))
    else:
        hs = np.ascontiguousarray(
            np.broadcast_to(np.asarray(h_static, dtype=float), (len(x), 3)))
    return GrainEnsemble(x=x, m=m, tc=tc, ani0=2.0 * ku / ms, ez=ez,
                         ms_v=ms_v, e_ratio=e_ratio, hsw300=hsw, gid=gid,
                         run=run, run_seeds=np.asarray(run_seeds, np.int64),
                         h_static=hs)


def scatter_state(ens: GrainEnsemble, stacks):
    """Write ensemble magnetization back into each run's MediaStack."""
    pos = 0
    for r, stack in enumerate(stacks):
        for li in range(stack.n_layers):
            n = len(stack.grains(li))
            stack.state[li] = ens.m[pos:pos + n].copy()
            pos += n


@dataclass
class HeadKinematics:
    """Shared-geometry head trajectories for a batch of runs.

    Pole center of head h in run r at time t:  v * t - soff[r, h]; the laser
    peak leads its pole by dlead[h].  Per-run amplitude columns support field
    sweeps and laser-off runs inside one batch.
    """

    v: float
    soff: np.ndarray       # (R, H) pole offsets [nm]
    dlead: np.ndarray      # (H,)
    half_w: np.ndarray     # (H,)
    sigma_t: np.ndarray    # (H,)
    sigma_h: np.ndarray    # (H,)
    uhat: np.ndarray       # (H, 3)
    hw: np.ndarray         # (R, H) field amplitudes [Oe]
    tw_exc: np.ndarray     # (R, H) Tw - T_env [K]
    bits: np.ndarray       # (R, H, NB) int8 bit sequences
    ramp_time: np.ndarray  # (H,) ns
    bit_length: float
    t_env: float

    def bit_arrays(self, t_grid) -> np.ndarray:
        """(R, H, S) effective signed bit amplitude with linear ramps."""
        R, H = self.soff.shape
        S = len(t_grid)
        out = np.empty((R, H, S))
        nb = self.bits.shape[2]
        for r in range(R):
            for h in range(H):
                xe = self.v * t_grid - self.soff[r, h] - self.half_w[h]
                k = np.clip(np.floor(xe / self.bit_length).astype(np.int64),
                            0, nb - 1)
                b_cur = self.bits[r, h, k].astype(float)
                b_prev = self.bits[r, h, np.maximum(k - 1, 0)].astype(float)
                t_entry = (k * self.bit_length + self.soff[r, h]
                           + self.half_w[h]) / self.v
                if self.ramp_time[h] > 0:
                    frac = np.clip((t_grid - t_entry) / self.ramp_time[h],
                                   0.0, 1.0)
                    out[r, h] = b_prev + (b_cur - b_prev) * frac
                else:
                    out[r, h] = b_cur
        return out

    def pole_positions(self, t_grid) -> np.ndarray:
        return (self.v * t_grid)[None, None, :] - self.soff[:, :, None]


# ---------------------------------------------------------------------------
# Integrator
# ---------------------------------------------------------------------------

class Integrator:
    """Advances a GrainEnsemble under moving-head thermal and field profiles.

    Chunked execution: per chunk an active-grain set is selected from head
    geometry (peak-temperature and stray-field risk estimates plus a settle
    tail), per-grain Philox noise is generated for exactly that set, and the
    fused Heun kernel advances it.  Chunk boundaries are fixed by the global
    step index, so results do not depend on snapshot timing, sharding, or
    thread count.
    """

    def __init__(self, ens: GrainEnsemble, kin: HeadKinematics | None,
                 params: LlbParams, t_begin: float):
        self.ens = ens
        self.kin = kin
        self.p = params.validate()
        self.t_begin = t_begin
        self.step = 0  # global step index since t_begin
        self.tabs = build_tables(params)
        dt_s = params.dt * 1e-9
        kb = constants.K_B
        self.spc = np.sqrt(2.0 * kb / (params.gamma_e * ens.ms_v * dt_s))
        self.sac = np.sqrt(2.0 * params.gamma_e * kb / (ens.ms_v * dt_s))
        if not params.noise:
            self.spc = np.zeros_like(self.spc)
            self.sac = np.zeros_like(self.sac)
        self.expiry = np.full(ens.n, -1, dtype=np.int64)
        self.forced = np.zeros(ens.n, dtype=bool)
        # Field-risk threshold [Oe]: fields below it cannot pull the barrier
        # into the thermally active regime at ambient temperature.
        frac = 1.0 - np.sqrt(np.minimum(
            self.p.risk_barrier / np.maximum(ens.e_ratio, 1e-9), 1.0))
        self.h_risk = np.maximum(frac * ens.hsw300, 250.0)
        self.chi_co = params.chi_field / params.beta_me
        self.fixed_temperature = params.t_env

    def force_active(self, idx):
        self.forced[np.asarray(idx, dtype=np.int64)] = True

    def t_at(self, step: int) -> float:
        return self.t_begin + step * self.p.dt

    def step_at(self, t: float) -> int:
        return int(round((t - self.t_begin) / self.p.dt))

    def _active_index(self, s0: int, s1: int) -> np.ndarray:
        p, ens, kin = self.p, self.ens, self.kin
        if not p.active_window:
            return np.arange(ens.n)
        direct = np.zeros(ens.n, dtype=bool)
        if kin is not None:
            t_a, t_b = self.t_at(s0), self.t_at(s1)
            tmax = np.full(ens.n, kin.t_env)
            hmax = np.zeros(ens.n)
            for h in range(kin.uhat.shape[0]):
                pa = kin.v * t_a - kin.soff[ens.run, h]
                pb = kin.v * t_b - kin.soff[ens.run, h]
                la = pa + kin.dlead[h]
                lb = pb + kin.dlead[h]
                dl = np.maximum(np.maximum(la - ens.x, ens.x - lb), 0.0)
                tmax += kin.tw_exc[ens.run, h] * np.exp(
                    -dl ** 2 / (2.0 * kin.sigma_t[h] ** 2))
                dp = np.maximum(np.maximum(pa - ens.x, ens.x - pb), 0.0)
                dedge = np.maximum(dp - kin.half_w[h], 0.0)
                hmax = np.maximum(hmax, np.abs(kin.hw[ens.run, h]) * np.exp(
                    -dedge ** 2 / (2.0 * kin.sigma_h[h] ** 2)))
            direct = (tmax > p.t_activate) | (
                (hmax > self.h_risk) & (tmax > p.field_t_floor))
        settle_steps = max(1, int(round(p.settle_time / p.dt)))
        self.expiry[direct] = s1 + settle_steps
        return np.nonzero(direct | (self.expiry > s0) | self.forced)[0]

    def advance(self, t_stop: float, events: dict | None = None,
                on_chunk=None) -> "Integrator":
        """Integrate to t_stop; events maps global step -> callback."""
        p = self.p
        stop_step = self.step_at(t_stop)
        events = dict(events or {})
        cs = p.chunk_steps
        while self.step < stop_step:
            chunk0 = (self.step // cs) * cs
            s_hi = min(chunk0 + cs, stop_step)
            self._run_chunk(chunk0, self.step, s_hi, events)
            if on_chunk is not None and self.step % cs == 0:
                on_chunk(self.t_at(self.step))
        if stop_step in events and stop_step == self.step:
            pass  # events at the stop step fire inside _run_chunk
        return self

    def _run_chunk(self, chunk0: int, s_lo: int, s_hi: int, events: dict):
        ens, p, kin = self.ens, self.p, self.kin
        idx = self._active_index(s_lo, s_hi)
        if len(idx) == 0:
            self.step = s_hi
            for s in sorted(ev for ev in events if s_lo < ev <= s_hi):
                events[s]()
            return
        n_steps = s_hi - chunk0
        if p.noise:
            noise = np.empty((n_steps, len(idx), 6), dtype=np.float32)
            runs_of_idx = ens.run[idx]
            for r in np.unique(runs_of_idx):
                sel = np.nonzero(runs_of_idx == r)[0]
                noise[:, sel, :] = rng.block_normals(
                    int(ens.run_seeds[r]), ens.gid[idx[sel]], chunk0, n_steps)
        else:
            noise = np.zeros((n_steps, len(idx), 6), dtype=np.float32)

        t_grid = self.t_begin + np.arange(chunk0, s_hi + 1) * p.dt
        if kin is not None:
            pole = np.ascontiguousarray(kin.pole_positions(t_grid))
            beff = np.ascontiguousarray(kin.bit_arrays(t_grid))
            hw, tw = kin.hw, kin.tw_exc
            dlead, halfw = kin.dlead, kin.half_w
            sig_t2 = 2.0 * kin.sigma_t ** 2
            sig_h2 = 2.0 * kin.sigma_h ** 2
            tcut = (7.5 * kin.sigma_t) ** 2
            hcut = (8.0 * kin.sigma_h) ** 2
            uhat = kin.uhat
            tenv = kin.t_env
        else:
            nr = len(ens.run_seeds)
            pole = np.zeros((nr, 0, len(t_grid)))
            beff = np.zeros((nr, 0, len(t_grid)))
            hw = np.zeros((nr, 0)); tw = np.zeros((nr, 0))
            dlead = np.zeros(0); halfw = np.zeros(0)
            sig_t2 = np.ones(0); sig_h2 = np.ones(0)
            tcut = np.zeros(0); hcut = np.zeros(0)
            uhat = np.zeros((0, 3))
            tenv = self.fixed_temperature

        m_act = np.ascontiguousarray(ens.m[idx])
        args = (m_act, np.ascontiguousarray(ens.x[idx]),
                np.ascontiguousarray(ens.tc[idx]),
                np.ascontiguousarray(ens.ani0[idx]),
                np.ascontiguousarray(ens.ez[idx]),
                np.ascontiguousarray(self.spc[idx]),
                np.ascontiguousarray(self.sac[idx]),
                np.ascontiguousarray(ens.h_static[idx]),
                np.ascontiguousarray(ens.run[idx]),
                noise, pole, beff, hw, uhat, tw, sig_t2, sig_h2, halfw,
                dlead, tcut, hcut, tenv, p.dt * 1e-9, p.gamma_e, p.damping,
                self.chi_co, p.tau_clamp, p.epsilon_m ** 2, self.tabs)
        bad = np.zeros(3)

        seg_lo = s_lo
        for ev in sorted(s for s in events if s_lo < s <= s_hi) + [s_hi]:
            if ev > seg_lo:
                _heun_chunk(*args, seg_lo - chunk0, ev - chunk0, bad)
                ens.m[idx] = m_act
                self.step = ev
                seg_lo = ev
            if ev in events and ev <= s_hi:
                events[ev]()
        if bad[0]:
            raise IntegratorInstabilityError(
                int(ens.gid[idx[int(bad[1])]]), float(np.sqrt(bad[2])), p.dt)


def simulate_fixed(ens: GrainEnsemble, T: float, duration: float,
                   params: LlbParams, on_capture=None,
                   capture_every: float | None = None) -> Integrator:
    """Advance an ensemble at a fixed uniform temperature.

    The moving-head machinery is bypassed; the applied field is the
    ensemble's static field.  Used by equilibrium and switching tests.
    """
    return simulate_schedule(ens, [(T, duration)], params,
                             on_capture=on_capture,
                             capture_every=capture_every)


def simulate_schedule(ens: GrainEnsemble, schedule, params: LlbParams,
                      on_capture=None,
                      capture_every: float | None = None) -> Integrator:
    """Advance an ensemble through (temperature, duration) segments.

    One integrator carries the whole schedule, so the per-grain noise
    streams advance monotonically across segments.
    """
    p = replace(params, active_window=False)
    integ = Integrator(ens, None, p, 0.0)
    total = sum(d for _, d in schedule)
    events = {}
    if on_capture is not None and capture_every:
        stride = max(1, int(round(capture_every / p.dt)))
        n = int(round(total / p.dt))
        for s in range(stride, n + 1, stride):
            events[s] = (lambda s=s: on_capture(s * p.dt))
    t = 0.0
    for T, duration in schedule:
        integ.fixed_temperature = float(T)
        t += duration
        integ.advance(t, events=events)
    return integ
