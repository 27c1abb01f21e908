"""Time integration of the discrete precession equations with a boundary drive.

The equations of motion are ds_n/dt = s_n x (s_{n+1} + s_{n-1} + h z), open
ends, with the drive supplying the missing left neighbor of the first site
(or, for the spatially decaying variant, a per-site applied field).  One step
is a Strang splitting over the even/odd sublattices: within a substep every
active spin sees a frozen local field (its neighbors live on the other
sublattice) and is rotated about it exactly, so spin norms are preserved to
rounding for any dt.  The time-dependent drive is evaluated at each substep's
own midpoint, keeping the step time-symmetric and second order; a fourth-order
Suzuki composition is available behind the `order` flag.

Note: on this bipartite nearest-neighbor chain each sublattice rotation also
conserves the total energy exactly (every bond term -s.omega is invariant
under rotation about omega), so undriven runs conserve energy to rounding,
not merely to O(dt^2).

The hot loop runs through the numba kernel in _kernels.py when available;
SPINWIRE_NO_NUMBA=1 forces the equivalent vectorized-numpy fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .chain import ChainParams, SpinConfig, energy_of
from .errors import ConfigError, NumericalError
from .soliton import SolitonSpec, tw_profile, tw_profile_derivative, tw_scales

USE_NUMBA = _kernels.HAVE_NUMBA and not os.environ.get("SPINWIRE_NO_NUMBA")

DEFAULT_WINDOW_XI = 12.0
DEFAULT_DT = 0.01
MAX_FRAMES_DEFAULT = 4000

# hard accuracy guard on dt * max local field (soft guideline is 0.1)
DT_FIELD_LIMIT = 0.25

# Suzuki fractal coefficient for the optional fourth-order composition
_P4 = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))
_SUZUKI4 = (_P4, _P4, 1.0 - 4.0 * _P4, _P4, _P4)

_KIND_CODE = {"none": _kernels.KIND_NONE, "ideal-tw": _kernels.KIND_IDEAL,
              "decaying-tw": _kernels.KIND_DECAYING}


@dataclass(frozen=True)
class DriveProtocol:
    """Boundary drive descriptor.

    kind "ideal-tw":    the virtual spin s0(t) follows the analytic profile at
                        the chain end, s0(t) = s_beta(-t/tau), inside the
                        active window |t| <= window_xi * tau, and is pinned to
                        +z outside it.
    kind "decaying-tw": no virtual neighbor; instead every site n >= 1 feels a
                        field w_n s0(t) with w_n an exponential profile of
                        penetration length ell, normalized to sum to one (so
                        the per-site amplitude is down by ~1/ell).
    kind "none":        fully open chain, no drive.
    """

    kind: str
    spec: SolitonSpec | None
    h: float
    window_xi: float = DEFAULT_WINDOW_XI
    ell: float | None = None

    def __post_init__(self):
        if self.kind not in ("ideal-tw", "decaying-tw", "none"):
            raise ConfigError(f"unknown drive kind {self.kind!r}")
        if self.kind == "none":
            return
        if self.spec is None:
            raise ConfigError(f"drive kind {self.kind!r} needs a soliton spec")
        if self.h <= 0:
            raise ConfigError("driven runs need h > 0 (soliton scales undefined at h=0)")
        if self.kind == "decaying-tw" and (self.ell is None or self.ell <= 0):
            raise ConfigError("decaying-tw drive needs a positive penetration length ell")
        if self.window_xi <= 0:
            raise ConfigError("drive window must be positive")

    @property
    def tau(self) -> float:
        return tw_scales(self.spec.beta, self.h).tau

    @property
    def t_on(self) -> float:
        return -self.window_xi * self.tau

    @property
    def t_off(self) -> float:
        return self.window_xi * self.tau

    def s0(self, t) -> np.ndarray:
        """Enforced boundary spin at time(s) t; +z outside the active window."""
        t = np.asarray(t, dtype=float)
        if self.kind == "none":
            out = np.zeros(t.shape + (3,))
            out[..., 2] = 1.0
            return out
        prof = tw_profile(self.spec, -t / self.tau)
        inside = (np.abs(t) < self.t_off)[..., None]
        rest = np.zeros_like(prof)
        rest[..., 2] = 1.0
        return np.where(inside, prof, rest)

    def s0_dot(self, t) -> np.ndarray:
        """Analytic time derivative of s0; zero outside the window."""
        t = np.asarray(t, dtype=float)
        if self.kind == "none":
            return np.zeros(t.shape + (3,))
        ds = tw_profile_derivative(self.spec, -t / self.tau) * (-1.0 / self.tau)
        inside = (np.abs(t) < self.t_off)[..., None]
        return np.where(inside, ds, 0.0)

    def site_weights(self, N: int) -> np.ndarray | None:
        """Exponential per-site drive weights for decaying-tw, summing to 1."""
        if self.kind != "decaying-tw":
            return None
        n = np.arange(1, N + 1, dtype=float)
        w = np.exp(-n / self.ell)
        return w / w.sum()


def make_drive(spec: SolitonSpec | None, h: float, kind: str = "ideal-tw",
               ell: float | None = None, window_xi: float = DEFAULT_WINDOW_XI) -> DriveProtocol:
    return DriveProtocol(kind=kind, spec=spec, h=h, window_xi=window_xi, ell=ell)


NO_DRIVE = DriveProtocol(kind="none", spec=None, h=0.0)


# ----------------------------------------------------------------- integrator

def _rotate(s: np.ndarray, f: np.ndarray, dt: float) -> np.ndarray:
    """Rotate spins s about their local fields f by angle -|f| dt (Rodrigues).

    Exact solution of ds/dt = s x f for frozen f; |f| = 0 rows pass through
    unchanged.  Shapes (..., 3).
    """
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    w = np.sqrt(fx * fx + fy * fy + fz * fz)
    ang = w * (-dt)
    c = np.cos(ang)
    si = np.sin(ang)
    wsafe = np.where(w > 0.0, w, 1.0)
    ax = fx / wsafe
    ay = fy / wsafe
    az = fz / wsafe
    sx, sy, sz = s[..., 0], s[..., 1], s[..., 2]
    dot1c = (ax * sx + ay * sy + az * sz) * (1.0 - c)
    out = np.empty_like(s)
    out[..., 0] = sx * c + (ay * sz - az * sy) * si + ax * dot1c
    out[..., 1] = sy * c + (az * sx - ax * sz) * si + ay * dot1c
    out[..., 2] = sz * c + (ax * sy - ay * sx) * si + az * dot1c
    return out


def _stage_table(order: int):
    """(parity, dt fraction, midpoint offset fraction) per substep."""
    strang = ((0, 0.5, 0.25), (1, 1.0, 0.5), (0, 0.5, 0.75))
    if order == 2:
        return strang
    if order == 4:
        stages = []
        off = 0.0
        for c in _SUZUKI4:
            stages.extend((p, f * c, off + m * c) for p, f, m in strang)
            off += c
        return tuple(stages)
    raise ConfigError(f"integrator order must be 2 or 4, got {order}")


def _sublattice_fields(spins: np.ndarray, parity: int, h: float) -> np.ndarray:
    """Neighbor-sum + h z fields for one sublattice; spins (..., N, 3)."""
    even = spins[..., 0::2, :]
    odd = spins[..., 1::2, :]
    N = spins.shape[-2]
    if parity == 0:
        f = np.empty_like(even)
        if N % 2 == 0:
            f[..., 1:, :] = odd[..., :-1, :] + odd[..., 1:, :]
        else:
            f[..., 1:-1, :] = odd[..., :-1, :] + odd[..., 1:, :]
            f[..., -1, :] = odd[..., -1, :]
        f[..., 0, :] = odd[..., 0, :]
    else:
        f = np.empty_like(odd)
        if N % 2 == 0:
            f[..., :-1, :] = even[..., :-1, :] + even[..., 1:, :]
            f[..., -1, :] = even[..., -1, :]
        else:
            f = even[..., :-1, :] + even[..., 1:, :]
    f[..., 2] += h
    return f


def _numpy_run_loop(spins, h, dt, nsteps, parities, fdts, tabs, tab_used, kind,
                    weights, dpow, use_power, powers, frames, fstride, record_frames,
                    zframes, zstride, record_z, probes, psites, pstride, record_p):
    """Vectorized-numpy twin of _kernels.run_loop (same signature semantics)."""
    w_even = weights[0::2, None] if kind == _kernels.KIND_DECAYING else None
    w_odd = weights[1::2, None] if kind == _kernels.KIND_DECAYING else None

    def power_into(row, idx):
        d = dpow[idx]
        if kind == _kernels.KIND_IDEAL:
            powers[row] = spins[:, 0, :] @ d
        else:
            powers[row] = np.einsum("n,bnc,c->b", weights, spins, d)

    if use_power:
        power_into(0, 0)
    for k in range(nsteps):
        for j in range(len(parities)):
            parity = int(parities[j])
            f = _sublattice_fields(spins, parity, h)
            if tab_used[j]:
                if kind == _kernels.KIND_IDEAL:
                    f[..., 0, :] += tabs[j, k]
                else:
                    f += (w_even if parity == 0 else w_odd) * tabs[j, k]
            sl = slice(0, None, 2) if parity == 0 else slice(1, None, 2)
            spins[..., sl, :] = _rotate(spins[..., sl, :], f, fdts[j] * dt)
        kk = k + 1
        if use_power:
            power_into(kk, kk)
        if record_frames and kk % fstride == 0:
            frames[kk // fstride] = spins
        if record_z and kk % zstride == 0:
            zframes[kk // zstride] = spins[..., 2]
        if record_p and kk % pstride == 0:
            probes[kk // pstride] = spins[:, psites, :]


def _check_dt(dt: float, h: float, driven: bool):
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    # worst-case local field: two unit neighbors + h (+ unit drive field)
    fmax = 2.0 + h + (1.0 if driven else 0.0)
    if dt * fmax > DT_FIELD_LIMIT:
        raise ConfigError(
            f"dt={dt} too large for field scale {fmax:.2f} "
            f"(dt*field = {dt * fmax:.3f} > {DT_FIELD_LIMIT}); aim for <= 0.1")


def _integrate(spins: np.ndarray, h: float, drive: DriveProtocol, t_start: float,
               nsteps: int, dt: float, order: int,
               frame_stride: int = 0, z_stride: int = 0,
               probe_sites=None, probe_stride: int = 0, want_power: bool = False):
    """Advance (B, N, 3) spins in place, recording at fixed strides.

    Returns dict with 'frames' (F, B, N, 3), 'zframes' (Fz, B, N), 'probes'
    (K, B, W, 3), 'powers' (nsteps+1, B) for the requested records.
    """
    B, N = spins.shape[0], spins.shape[1]
    stages = _stage_table(order)
    parities = np.array([s[0] for s in stages], dtype=np.int64)
    fdts = np.array([s[1] for s in stages], dtype=np.float64)
    kind = _KIND_CODE[drive.kind]
    weights = drive.site_weights(N)
    weights = np.zeros(N) if weights is None else weights

    base = t_start + np.arange(nsteps) * dt
    tab_used = np.zeros(len(stages), dtype=np.bool_)
    tabs = np.zeros((len(stages), max(nsteps, 1), 3))
    for j, (parity, _, fmid) in enumerate(stages):
        if kind == _kernels.KIND_NONE or (kind == _kernels.KIND_IDEAL and parity == 1):
            continue
        tab_used[j] = True
        if nsteps:
            tabs[j] = drive.s0(base + fmid * dt)

    use_power = want_power and kind != _kernels.KIND_NONE
    if use_power:
        dpow = -drive.s0_dot(t_start + np.arange(nsteps + 1) * dt)
    else:
        dpow = np.zeros((1, 3))
    powers = np.zeros((nsteps + 1 if use_power else 1, B))

    record_frames = frame_stride > 0
    F = nsteps // frame_stride + 1 if record_frames else 1
    frames = np.empty((F, B, N, 3)) if record_frames else np.empty((1, 1, 1, 3))
    if record_frames:
        frames[0] = spins

    record_z = z_stride > 0
    Fz = nsteps // z_stride + 1 if record_z else 1
    zframes = np.empty((Fz, B, N)) if record_z else np.empty((1, 1, 1))
    if record_z:
        zframes[0] = spins[..., 2]

    record_p = probe_sites is not None and probe_stride > 0
    psites = np.asarray(probe_sites, dtype=np.int64) if record_p else np.zeros(1, dtype=np.int64)
    K = nsteps // probe_stride + 1 if record_p else 1
    probes = np.empty((K, B, len(psites), 3)) if record_p else np.empty((1, 1, 1, 3))
    if record_p:
        if psites.min() < 0 or psites.max() >= N:
            raise ConfigError("probe sites outside the chain")
        probes[0] = spins[:, psites, :]

    loop = _kernels.run_loop if USE_NUMBA else _numpy_run_loop
    loop(spins, h, dt, nsteps, parities, fdts, tabs, tab_used, kind, weights,
         dpow, use_power, powers, frames, max(frame_stride, 1), record_frames,
         zframes, max(z_stride, 1), record_z, probes, psites,
         max(probe_stride, 1), record_p)

    if not np.isfinite(spins).all():
        raise NumericalError("non-finite spin state after integration")
    return {"frames": frames if record_frames else None,
            "zframes": zframes if record_z else None,
            "probes": probes if record_p else None,
            "powers": powers if use_power else None}


def integrate_step(config: SpinConfig, params: ChainParams, drive: DriveProtocol,
                   t: float, dt: float, order: int = 2) -> SpinConfig:
    """Advance one configuration by a single step and return the new one."""
    if len(config) != params.N:
        raise ConfigError(f"configuration has {len(config)} sites, params.N = {params.N}")
    _check_dt(dt, params.h, drive.kind != "none")
    spins = config.spins[None].copy()
    _integrate(spins, params.h, drive, t, 1, dt, order)
    return SpinConfig(spins[0])


# ----------------------------------------------------------------- trajectory

@dataclass(frozen=True)
class EnergyLedger:
    E_initial: float
    E_final: float
    work_integral: float


@dataclass
class ProbeRecord:
    """Fine-stride record of a few sites, for qubit replay.

    spins has shape (K, W, 3) for a single run or (B, K, W, 3) for a batch.
    """

    sites: np.ndarray
    times: np.ndarray
    spins: np.ndarray

    def member(self, b: int) -> "ProbeRecord":
        if self.spins.ndim != 4:
            raise ConfigError("not a batch probe record")
        return ProbeRecord(sites=self.sites, times=self.times, spins=self.spins[b])


@dataclass
class Trajectory:
    """Sampled run: times (uniform stride), full frames, the drive record and
    the energy ledger, plus the params/drive needed to interpret them."""

    times: np.ndarray          # (F,)
    frames: np.ndarray         # (F, N, 3)
    drive_record: np.ndarray   # (F, 3)
    ledger: EnergyLedger
    params: ChainParams
    drive: DriveProtocol
    dt: float
    stride: int
    probe: ProbeRecord | None = None

    @property
    def sz(self) -> np.ndarray:
        return self.frames[:, :, 2]

    def frame(self, i: int) -> SpinConfig:
        return SpinConfig(self.frames[i])

    def window(self, t_min: float = -np.inf, t_max: float = np.inf) -> "Trajectory":
        """Time-sliced view (ledger and probe are kept as-is)."""
        m = (self.times >= t_min) & (self.times <= t_max)
        return replace(self, times=self.times[m], frames=self.frames[m],
                       drive_record=self.drive_record[m])


def _start_time(drive: DriveProtocol) -> float:
    return drive.t_on if drive.kind != "none" else 0.0


def run_injection(params: ChainParams, drive: DriveProtocol, initial: SpinConfig,
                  t_end: float, dt: float = DEFAULT_DT, sample_stride: int | None = None,
                  probe_sites=None, probe_stride: int = 1, order: int = 2) -> Trajectory:
    """Drive the chain from `initial` and sample the trajectory.

    Time starts at the opening of the drive window (-window_xi * tau) for
    driven runs, at 0 otherwise.  The ledger records the chain energy before
    and after plus the work fed in by the drive,
    W = -int ds0/dt . s_1 dt (trapezoid over steps), which equals the total
    energy change including the boundary-bond term.
    """
    if len(initial) != params.N:
        raise ConfigError(f"initial configuration has {len(initial)} sites, N = {params.N}")
    driven = drive.kind != "none"
    _check_dt(dt, params.h, driven)
    t_start = _start_time(drive)
    if t_end <= t_start:
        raise ConfigError(f"t_end = {t_end} must exceed start time {t_start}")
    nsteps = int(math.ceil((t_end - t_start) / dt - 1e-12))
    if sample_stride is None:
        sample_stride = max(1, int(math.ceil(nsteps / MAX_FRAMES_DEFAULT)))

    spins = initial.spins[None].copy()
    E0 = float(energy_of(spins[0], params.h))
    rec = _integrate(spins, params.h, drive, t_start, nsteps, dt, order,
                     frame_stride=sample_stride,
                     probe_sites=probe_sites,
                     probe_stride=probe_stride if probe_sites is not None else 0,
                     want_power=driven)

    frames = rec["frames"][:, 0]
    times = t_start + dt * sample_stride * np.arange(frames.shape[0])
    if rec["powers"] is not None:
        p = rec["powers"][:, 0]
        work = float(np.trapezoid(p, dx=dt)) if hasattr(np, "trapezoid") \
            else float(np.trapz(p, dx=dt))
    else:
        work = 0.0
    ledger = EnergyLedger(E_initial=E0, E_final=float(energy_of(spins[0], params.h)),
                          work_integral=work)
    probe = None
    if rec["probes"] is not None:
        ptimes = t_start + dt * probe_stride * np.arange(rec["probes"].shape[0])
        probe = ProbeRecord(sites=np.asarray(probe_sites, dtype=int), times=ptimes,
                            spins=rec["probes"][:, 0])
    return Trajectory(times=times, frames=frames, drive_record=drive.s0(times),
                      ledger=ledger, params=params, drive=drive, dt=dt,
                      stride=sample_stride, probe=probe)


@dataclass
class BatchRun:
    """Lean ensemble run output: z-frames for tracking, probes for qubit
    replay, and the per-member energy bookkeeping."""

    times: np.ndarray          # (F,)
    sz: np.ndarray             # (B, F, N)
    E_initial: np.ndarray      # (B,)
    E_final: np.ndarray        # (B,)
    final_spins: np.ndarray    # (B, N, 3)
    probe: ProbeRecord | None  # spins (B, K, W, 3) when requested


def run_injection_batch(params: ChainParams, drive: DriveProtocol, initials: np.ndarray,
                        t_end: float, dt: float = DEFAULT_DT, sample_stride: int = 100,
                        probe_sites=None, probe_stride: int = 1, order: int = 2) -> BatchRun:
    """Run B independent chains under the same drive in one pass.

    `initials` has shape (B, N, 3).  Only s^z frames are stored (enough for
    core tracking) plus optional full vectors on a few probed sites.
    """
    initials = np.asarray(initials, dtype=np.float64)
    if initials.ndim != 3 or initials.shape[1] != params.N or initials.shape[2] != 3:
        raise ConfigError(f"initials must have shape (B, N, 3), got {initials.shape}")
    driven = drive.kind != "none"
    _check_dt(dt, params.h, driven)
    t_start = _start_time(drive)
    if t_end <= t_start:
        raise ConfigError(f"t_end = {t_end} must exceed start time {t_start}")
    nsteps = int(math.ceil((t_end - t_start) / dt - 1e-12))

    spins = initials.copy()
    E0 = energy_of(spins, params.h)
    rec = _integrate(spins, params.h, drive, t_start, nsteps, dt, order,
                     z_stride=sample_stride,
                     probe_sites=probe_sites,
                     probe_stride=probe_stride if probe_sites is not None else 0)
    zf = rec["zframes"]
    times = t_start + dt * sample_stride * np.arange(zf.shape[0])
    probe = None
    if rec["probes"] is not None:
        ptimes = t_start + dt * probe_stride * np.arange(rec["probes"].shape[0])
        probe = ProbeRecord(sites=np.asarray(probe_sites, dtype=int), times=ptimes,
                            spins=rec["probes"].transpose(1, 0, 2, 3))
    return BatchRun(times=times, sz=zf.transpose(1, 0, 2), E_initial=E0,
                    E_final=energy_of(spins, params.h), final_spins=spins, probe=probe)
