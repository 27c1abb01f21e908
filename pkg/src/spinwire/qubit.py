"""Bloch-vector evolution of a spin-1/2 qubit coupled to the chain.

The qubit at chain site n0 sees the effective field delta*z + mu*s_tilde(tau),
where s_tilde is the p_n-weighted average of nearby chain spins and
tau = h t is the dimensionless time of the qubit equation
d a/d tau = a x (delta z + mu s_tilde).  Integration is by exact incremental
rotations about the field evaluated at substep midpoints, so |a| is conserved
to rounding and the error is O(dtau^2).

The chain is evolved independently and replayed here (one-way coupling);
``backaction_ratio`` quantifies why that is legitimate: the maximal energy the
qubit can absorb is a small fraction of the soliton energy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .chain import SpinConfig, ZHAT
from .dynamics import ProbeRecord, Trajectory, _rotate
from .errors import ConfigError
from .soliton import SolitonSpec, tw_profile

GAUSSIAN_HALFWIDTH_SIGMAS = 6.0
BACKACTION_FLAG = 0.2
ASYMPTOTIC_FIELD_TOL = 1e-4
DEFAULT_DTAU = 0.005
# accuracy guard: rotation angle per step, |field| * dtau
DTAU_FIELD_LIMIT = 0.25
# frame spacing must resolve the precession period: d tau <= 0.1/(mu+delta)
FRAME_SPACING_FACTOR = 0.1


@dataclass(frozen=True)
class QubitParams:
    delta: float
    mu: float
    alpha: float = 0.0
    qubit_site: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError(f"interaction range alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class CouplingProfile:
    """Normalized site weights p_n on integer offsets around the qubit site."""

    offsets: np.ndarray
    weights: np.ndarray

    @classmethod
    def gaussian(cls, alpha: float, half_width: int | None = None) -> "CouplingProfile":
        """p_n ~ exp(-n^2 / 2 alpha^2) truncated at +-max(6 alpha, default) and
        renormalized; alpha = 0 degenerates to the single site n = 0."""
        if alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {alpha}")
        if alpha == 0.0:
            return cls(offsets=np.array([0]), weights=np.array([1.0]))
        if half_width is None:
            half_width = int(math.ceil(GAUSSIAN_HALFWIDTH_SIGMAS * alpha))
        n = np.arange(-half_width, half_width + 1)
        w = np.exp(-(n.astype(float) ** 2) / (2.0 * alpha * alpha))
        return cls(offsets=n, weights=w / w.sum())

    def __post_init__(self):
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ConfigError("coupling weights must sum to 1")
        if (self.weights < 0).any():
            raise ConfigError("coupling weights must be nonnegative")


class BlochState:
    """Unit 3-vector for the pure qubit state."""

    __slots__ = ("a",)

    def __init__(self, a):
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (3,):
            raise ConfigError(f"Bloch vector must have shape (3,), got {a.shape}")
        if abs(np.linalg.norm(a) - 1.0) > 1e-10:
            raise ConfigError("Bloch vector must be unit length (pure state)")
        self.a = a


def smeared_field(frame: SpinConfig, profile: CouplingProfile, site: int) -> np.ndarray:
    """s_tilde = sum_n p_n s_n around `site`; |s_tilde| <= 1 with equality only
    for parallel windowed spins."""
    idx = site + profile.offsets
    if idx.min() < 0 or idx.max() >= len(frame):
        raise ConfigError(
            f"coupling window [{idx.min()}, {idx.max()}] exceeds chain bounds (N={len(frame)})")
    return profile.weights @ frame.spins[idx]


# ------------------------------------------------------------- field sources

class AnalyticSolitonField:
    """Ideal traveling-wave field source: s_n(tau) evaluated on the coupling
    window with the core crossing the qubit site at tau = 0."""

    def __init__(self, spec: SolitonSpec, h: float):
        if h <= 0:
            raise ConfigError("analytic soliton source needs h > 0")
        self.spec = spec
        self.h = h
        self._k_x = math.sqrt(h) * math.sin(spec.beta)
        self._k_t = math.sin(2.0 * spec.beta)

    def stilde(self, taus: np.ndarray, profile: CouplingProfile) -> np.ndarray:
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        xi = self._k_x * profile.offsets[None, :] - self._k_t * taus[:, None]
        prof = tw_profile(self.spec, xi)              # (K, W, 3)
        return np.einsum("w,kwc->kc", profile.weights, prof)

    def default_span(self, window_xi: float = 12.0):
        half = window_xi / self._k_t
        return (-half, half)


class _FrameInterpolator:
    """Linear-in-tau interpolation of recorded chain spins on the window."""

    def __init__(self, taus: np.ndarray, window_spins: np.ndarray):
        # window_spins: (K, W, 3) at strictly increasing taus
        self.taus = taus
        self.spins = window_spins

    def stilde(self, taus: np.ndarray, weights: np.ndarray) -> np.ndarray:
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        if taus.min() < self.taus[0] - 1e-9 or taus.max() > self.taus[-1] + 1e-9:
            raise ConfigError(
                f"frame coverage gap: requested tau in [{taus.min():.3f}, {taus.max():.3f}] "
                f"but frames cover [{self.taus[0]:.3f}, {self.taus[-1]:.3f}]")
        j = np.clip(np.searchsorted(self.taus, taus) - 1, 0, len(self.taus) - 2)
        w = (taus - self.taus[j]) / (self.taus[j + 1] - self.taus[j])
        w = np.clip(w, 0.0, 1.0)[:, None, None]
        sp = (1.0 - w) * self.spins[j] + w * self.spins[j + 1]
        return np.einsum("w,kwc->kc", weights, sp)


def _source_interpolator(source, qp: QubitParams, profile: CouplingProfile, h: float):
    if isinstance(source, Trajectory):
        idx = qp.qubit_site + profile.offsets
        if idx.min() < 0 or idx.max() >= source.params.N:
            raise ConfigError("coupling window exceeds chain bounds")
        taus = h * source.times
        spins = source.frames[:, idx, :]
        return _FrameInterpolator(taus, spins), taus
    if isinstance(source, ProbeRecord):
        positions = {int(s): i for i, s in enumerate(source.sites)}
        want = qp.qubit_site + profile.offsets
        try:
            cols = [positions[int(s)] for s in want]
        except KeyError as e:
            raise ConfigError(f"probe record does not cover site {e} of the coupling window")
        taus = h * source.times
        spins = source.spins[:, cols, :] if source.spins.ndim == 3 else None
        if spins is None:
            raise ConfigError("probe record must hold a single run (K, W, 3)")
        return _FrameInterpolator(taus, spins), taus
    raise ConfigError(f"unsupported field source {type(source).__name__}")


# ---------------------------------------------------------------- evolution

@dataclass
class BlochTrajectory:
    taus: np.ndarray       # (K,)
    a: np.ndarray          # (K, 3)
    stilde: np.ndarray     # (K, 3) field samples at taus
    qp: QubitParams

    def write_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "ax", "ay", "az", "stilde_x", "stilde_y", "stilde_z"])
            for k in range(len(self.taus)):
                w.writerow([repr(float(v)) for v in
                            (self.taus[k], *self.a[k], *self.stilde[k])])


def evolve_qubit(field_source, qp: QubitParams, a0: BlochState | None = None,
                 tau_span=None, dtau: float = DEFAULT_DTAU,
                 profile: CouplingProfile | None = None, h: float | None = None,
                 record_stride: int = 1) -> BlochTrajectory:
    """Integrate the Bloch equation over tau_span against the given source.

    Sources: AnalyticSolitonField, Trajectory (tau = h t), or a ProbeRecord
    from a run.  The field is evaluated (or linearly interpolated) at substep
    midpoints.
    """
    if profile is None:
        profile = CouplingProfile.gaussian(qp.alpha)
    fmax = abs(qp.delta) + abs(qp.mu)
    if dtau <= 0:
        raise ConfigError(f"dtau must be positive, got {dtau}")
    if dtau * fmax > DTAU_FIELD_LIMIT:
        raise ConfigError(
            f"dtau={dtau} too large for field scale {fmax:.2f} "
            f"(dtau*field = {dtau * fmax:.3f} > {DTAU_FIELD_LIMIT})")

    if isinstance(field_source, AnalyticSolitonField):
        interp = None
        analytic = field_source
        if tau_span is None:
            tau_span = analytic.default_span()
    else:
        if h is None:
            if isinstance(field_source, Trajectory):
                h = field_source.drive.h if field_source.drive.kind != "none" \
                    else field_source.params.h
            else:
                raise ConfigError("need h to map chain time onto tau for this source")
        interp, frame_taus = _source_interpolator(field_source, qp, profile, h)
        analytic = None
        spacing = np.diff(frame_taus).max()
        if spacing > FRAME_SPACING_FACTOR / max(fmax, 1e-12) + 1e-12:
            raise ConfigError(
                f"recorded frame spacing {spacing:.4f} tau too coarse for mu+delta={fmax:.3f}; "
                f"need <= {FRAME_SPACING_FACTOR / fmax:.4f} (reduce sample/probe stride)")
        if tau_span is None:
            tau_span = (frame_taus[0], frame_taus[-1])

    tau0, tau1 = float(tau_span[0]), float(tau_span[1])
    if tau1 <= tau0:
        raise ConfigError(f"empty tau span ({tau0}, {tau1})")
    nsteps = int(math.ceil((tau1 - tau0) / dtau - 1e-12))

    def field_at(taus):
        if analytic is not None:
            st = analytic.stilde(taus, profile)
        else:
            st = interp.stilde(taus, profile.weights)
        return st

    a = (a0.a if a0 is not None else ZHAT).copy()
    mids = tau0 + (np.arange(nsteps) + 0.5) * dtau
    # field at all substep midpoints, computed in one vectorized pass
    st_mid = field_at(mids)
    omega = qp.mu * st_mid
    omega[:, 2] += qp.delta

    n_rec = nsteps // record_stride + 1
    taus_rec = np.empty(n_rec)
    a_rec = np.empty((n_rec, 3))
    taus_rec[0] = tau0
    a_rec[0] = a
    j = 1
    for k in range(nsteps):
        a = _rotate(a, omega[k], dtau)
        if (k + 1) % record_stride == 0:
            taus_rec[j] = tau0 + (k + 1) * dtau
            a_rec[j] = a
            j += 1
    taus_rec = taus_rec[:j]
    a_rec = a_rec[:j]
    return BlochTrajectory(taus=taus_rec, a=a_rec, stilde=field_at(taus_rec), qp=qp)


# ---------------------------------------------------------------- asymptotics

@dataclass(frozen=True)
class AsymptoticState:
    az_out: float
    aperp_out: float
    omega: float
    phi: float


def extract_asymptotics(btraj: BlochTrajectory, qp: QubitParams, window,
                        field_tol: float = ASYMPTOTIC_FIELD_TOL) -> AsymptoticState:
    """Fit the uniform precession after transit: az from the window mean,
    (omega, phi) from a least-squares fit of the unwrapped transverse phase.

    The window must lie entirely after the transit: the recorded field must be
    within field_tol of +z throughout it (1e-4 suits ideal sources; generated
    solitons leave trailing ripples at the 1e-2 level, so pass a looser value
    for those).  The reported omega is the magnitude of the precession rate
    (the sense about +z is clockwise); phi is the transverse phase
    extrapolated to tau = 0 with the signed rate.
    """
    t0, t1 = float(window[0]), float(window[1])
    m = (btraj.taus >= t0) & (btraj.taus <= t1)
    if m.sum() < 8:
        raise ConfigError("asymptotics window contains too few samples")
    dev = np.abs(btraj.stilde[m] - ZHAT).max()
    if dev > field_tol:
        raise ConfigError(
            f"window overlaps transit: |s_tilde - z| up to {dev:.2e} > {field_tol}")
    taus = btraj.taus[m]
    a = btraj.a[m]
    az = float(a[:, 2].mean())
    aperp = float(np.hypot(a[:, 0], a[:, 1]).mean())
    if aperp < 1e-12:
        return AsymptoticState(az_out=az, aperp_out=aperp, omega=abs(qp.mu + qp.delta),
                               phi=0.0)
    theta = np.unwrap(np.arctan2(a[:, 1], a[:, 0]))
    slope, intercept = np.polyfit(taus, theta, 1)
    phi = math.remainder(intercept, 2.0 * math.pi)
    return AsymptoticState(az_out=az, aperp_out=aperp, omega=float(abs(slope)),
                           phi=float(phi))


def write_asymptotics(state: AsymptoticState, path):
    with open(path, "w") as fh:
        for k in ("az_out", "aperp_out", "omega", "phi"):
            fh.write(f"{k}: {getattr(state, k)!r}\n")


# ---------------------------------------------------------------- back-action

def backaction_ratio(qp: QubitParams, beta: float, h: float,
                     S_over_hbar: float) -> float:
    """Maximal qubit energy gain over the soliton energy,
    (mu + delta)/8 * (hbar/S) * sqrt(h)/sin(beta).

    One-way coupling is justified while this is small; a warning is emitted at
    >= 0.2 (including the beta -> 0 divergence)."""
    if beta <= 0 or beta >= math.pi / 2:
        raise ConfigError(f"beta must lie in (0, pi/2), got {beta}")
    if h <= 0 or S_over_hbar <= 0:
        raise ConfigError("h and S/hbar must be positive")
    ratio = (qp.mu + qp.delta) / 8.0 / S_over_hbar * math.sqrt(h) / math.sin(beta)
    if ratio >= BACKACTION_FLAG:
        warnings.warn(
            f"back-action non-negligible: qubit/soliton energy ratio {ratio:.3f} >= "
            f"{BACKACTION_FLAG}; one-way coupling is questionable here",
            stacklevel=2)
    return ratio
