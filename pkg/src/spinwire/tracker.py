"""Locate and follow the soliton core in a trajectory; estimate the effective
amplitude beta' two independent ways (from the measured velocity and from a
profile fit of the s^z dip).

The core locator uses the s^z minimum: the dip is the robust signature, while
the in-plane phase winds and is noisy at finite temperature.  Frames qualify
only when the dip is below the threshold and the core sits at least an
end-margin away from both chain ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .errors import ConfigError, DetectionError
from .dynamics import Trajectory
from .soliton import tw_scales

DEFAULT_THRESHOLD = 0.9
MIN_FRAMES = 10
END_MARGIN_LAMBDAS = 5.0


@dataclass(frozen=True)
class TrackResult:
    times: np.ndarray            # (K,) usable frame times
    positions: np.ndarray        # (K,) sub-lattice core positions
    velocity: float
    threshold: float
    end_margin: float
    beta_eff_velocity: float | None = None
    beta_eff_shape: float | None = None
    lambda_shape: float | None = None
    shape_residual: float | None = None

    def write_positions_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "core_position"])
            for t, p in zip(self.times, self.positions):
                w.writerow([repr(float(t)), repr(float(p))])

    def write_record(self, path):
        with open(path, "w") as fh:
            fh.write(f"frames_used: {len(self.times)}\n")
            fh.write(f"velocity: {self.velocity!r}\n")
            fh.write(f"threshold: {self.threshold!r}\n")
            fh.write(f"end_margin: {self.end_margin!r}\n")
            fh.write(f"beta_eff_velocity: {self.beta_eff_velocity!r}\n")
            fh.write(f"beta_eff_shape: {self.beta_eff_shape!r}\n")
            fh.write(f"lambda_shape: {self.lambda_shape!r}\n")
            fh.write(f"shape_residual: {self.shape_residual!r}\n")


def core_positions_z(times: np.ndarray, sz: np.ndarray, threshold: float,
                     end_margin: float):
    """Per-frame parabolic-interpolated s^z minima, filtered by threshold and
    end margin.  Works on raw (F, N) z-frames."""
    N = sz.shape[1]
    idx = np.argmin(sz, axis=1)
    zmin = sz[np.arange(len(sz)), idx]
    interior = (idx >= 1) & (idx <= N - 2)
    safe_idx = np.clip(idx, 1, N - 2)
    rows = np.arange(len(sz))
    zl = sz[rows, safe_idx - 1]
    z0 = sz[rows, safe_idx]
    zr = sz[rows, safe_idx + 1]
    den = zl - 2.0 * z0 + zr
    off = np.where(np.abs(den) > 0, 0.5 * (zl - zr) / np.where(den == 0, 1.0, den), 0.0)
    pos = safe_idx + np.clip(off, -0.5, 0.5)
    ok = interior & (zmin < threshold) & (pos >= end_margin) & (pos <= N - 1 - end_margin)
    return times[ok], pos[ok]


def _default_margin(traj: Trajectory) -> float:
    if traj.drive.kind != "none" and traj.drive.spec is not None:
        lam = tw_scales(traj.drive.spec.beta, traj.drive.h).lam
        return END_MARGIN_LAMBDAS * lam
    return END_MARGIN_LAMBDAS


def track_core(traj: Trajectory, threshold: float = DEFAULT_THRESHOLD,
               end_margin: float | None = None) -> TrackResult:
    """Fit the core world line and its velocity (least-squares slope)."""
    if not -1.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (-1, 1), got {threshold}")
    if end_margin is None:
        end_margin = _default_margin(traj)
    tt, pos = core_positions_z(traj.times, traj.sz, threshold, end_margin)
    if len(tt) == 0:
        raise DetectionError("no soliton detected: no frame has a qualifying s^z dip")
    if len(tt) < MIN_FRAMES:
        raise DetectionError(f"insufficient frames: only {len(tt)} usable (need {MIN_FRAMES})")
    slope, _ = np.polyfit(tt, pos, 1)
    return TrackResult(times=tt, positions=pos, velocity=float(slope),
                       threshold=threshold, end_margin=float(end_margin))


def _sz_model(n, beta, lam, n0):
    arg = (n - n0) / lam
    e = np.exp(-np.abs(arg))
    sech = 2.0 * e / (1.0 + e * e)
    return 1.0 - 2.0 * (np.sin(beta) * sech) ** 2


def fit_profile(sz_frame: np.ndarray, n0_guess: float, beta_guess: float,
                lam_guess: float, fit_halfwidth: float | None = None):
    """Least-squares fit of one s^z frame to the traveling-wave dip shape.

    Returns (beta, lambda, center, rms_residual); beta and lambda are free,
    as is the center."""
    n = np.arange(len(sz_frame), dtype=float)
    if fit_halfwidth is None:
        fit_halfwidth = max(8.0 * lam_guess, 20.0)
    m = (n >= n0_guess - fit_halfwidth) & (n <= n0_guess + fit_halfwidth)
    if m.sum() < 8:
        raise DetectionError("profile fit window too small")
    nn, zz = n[m], sz_frame[m]

    def resid(p):
        return _sz_model(nn, p[0], p[1], p[2]) - zz

    lo = [1e-3, 0.05, nn[0]]
    hi = [math.pi / 2 - 1e-3, 1e4, nn[-1]]
    x0 = [min(max(beta_guess, lo[0] + 1e-6), hi[0] - 1e-6),
          max(lam_guess, 0.1), float(n0_guess)]
    sol = least_squares(resid, x0=x0, bounds=(lo, hi))
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    return float(sol.x[0]), float(sol.x[1]), float(sol.x[2]), rms


def estimate_beta_eff(traj: Trajectory, track: TrackResult,
                      h: float | None = None) -> TrackResult:
    """Fill in the two effective-amplitude estimates.

    beta_eff_velocity inverts v = 2 sqrt(h) cos(beta'); beta_eff_shape fits
    the s^z profile of the frame whose core is nearest mid-chain, with the
    width left free."""
    if h is None:
        h = traj.drive.h if traj.drive.kind != "none" else traj.params.h
    if h <= 0:
        raise ConfigError("need h > 0 to convert velocity to beta'")
    if not np.isfinite(track.velocity):
        raise DetectionError("track has no finite velocity")
    c = abs(track.velocity) / (2.0 * math.sqrt(h))
    if c > 1.0:
        raise DetectionError(
            f"supersonic fit failure: |v|/(2 sqrt(h)) = {c:.4f} > 1, no real beta'")
    beta_v = math.acos(c)

    mid = traj.params.N / 2.0
    k = int(np.argmin(np.abs(track.positions - mid)))
    fi = int(np.argmin(np.abs(traj.times - track.times[k])))
    lam_guess = tw_scales(beta_v, h).lam if beta_v > 1e-3 else 10.0
    beta_s, lam_s, _, rms = fit_profile(traj.sz[fi], track.positions[k],
                                        beta_v if beta_v > 1e-3 else 0.5, lam_guess)
    return replace(track, beta_eff_velocity=beta_v, beta_eff_shape=beta_s,
                   lambda_shape=lam_s, shape_residual=rms)
