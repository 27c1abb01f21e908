"""Pilot 2: tracker thresholds/shape fit, energy ratios, generated-soliton qubit flip."""
import time
import numpy as np
from scipy.optimize import least_squares

from scratch_pilot import (EVEN, ODD, rotate, local_field, substep, strang_step,
                           energy, tw_profile, heat_bath)


def run_injection(N, h, tanb, t_end, dt=0.01, stride=100, T=0.0, seed=0,
                  qubit_site=None, qstride=25):
    beta = np.arctan(tanb)
    tau = 1 / (h * np.sin(2 * beta))
    XI = 12.0
    t_on, t_off = -XI * tau, XI * tau

    def drive(t):
        if t <= t_on or t >= t_off:
            return np.array([0.0, 0.0, 1.0])
        return tw_profile(beta, -t / tau)

    if T > 0:
        s = heat_bath(N, h, T, seed, sweeps=200)
    else:
        s = np.zeros((N, 3)); s[:, 2] = 1.0
    e0 = energy(s, h)
    t = t_on
    k = 0
    ts, zf = [], []
    qts, qspins = [], []
    nsteps = int(round((t_end - t_on) / dt))
    for k in range(nsteps):
        strang_step(s, h, t, dt, drive)
        t += dt
        if (k + 1) % stride == 0:
            ts.append(t); zf.append(s[:, 2].copy())
        if qubit_site is not None and (k + 1) % qstride == 0:
            qts.append(t); qspins.append(s[qubit_site].copy())
    dE = energy(s, h) - e0
    out = dict(times=np.array(ts), sz=np.array(zf), dE=dE, beta=beta, h=h, N=N)
    if qubit_site is not None:
        out["qts"] = np.array(qts); out["qspins"] = np.array(qspins)
    return out


def track(times, sz, N, lam, threshold, t_min=None):
    margin = 5 * lam
    pos, tt = [], []
    for t, z in zip(times, sz):
        if t_min is not None and t < t_min:
            continue
        i = int(np.argmin(z))
        if z[i] >= threshold or i < margin or i > N - 1 - margin:
            continue
        den = z[i - 1] - 2 * z[i] + z[i + 1]
        off = 0.5 * (z[i - 1] - z[i + 1]) / den if den != 0 else 0.0
        pos.append(i + off); tt.append(t)
    tt, pos = np.array(tt), np.array(pos)
    v = np.polyfit(tt, pos, 1)[0] if len(tt) > 10 else np.nan
    return tt, pos, v


def shape_fit(z, n0_guess, beta_guess, lam_guess):
    n = np.arange(len(z))
    w = max(8 * lam_guess, 20)
    m = (n > n0_guess - w) & (n < n0_guess + w)

    def resid(p):
        b, lam, n0 = p
        sech = 1 / np.cosh((n[m] - n0) / lam)
        return (1 - 2 * np.sin(b) ** 2 * sech ** 2) - z[m]

    r = least_squares(resid, x0=[beta_guess, lam_guess, n0_guess],
                      bounds=([1e-3, 0.1, 0], [np.pi / 2 - 1e-3, 1e3, len(z)]))
    rms = np.sqrt(np.mean(r.fun ** 2))
    return r.x[0], r.x[1], rms


print("=== tracker + energy on the three Fig-2-style cases + h=0.2 ===")
cases = [
    (1000, 0.05, 0.2, 900, None),
    (300, 0.05, 2.0, 1000, None),
    (300, 1.0, 3.0, 250, None),
    (500, 0.2, 2.0, 1200, None),
]
for N, h, tanb, t_end, _ in cases:
    t0 = time.time()
    r = run_injection(N, h, tanb, t_end)
    beta = r["beta"]
    lam = 1 / (np.sqrt(h) * np.sin(beta))
    thr = 1 - np.sin(beta) ** 2  # halfway into the analytic dip
    v_tw = 2 * np.sqrt(h) * np.cos(beta)
    tt, pos, v = track(r["times"], r["sz"], N, lam, thr)
    # late-half fit for comparison
    half = tt > (tt[0] + tt[-1]) / 2 if len(tt) else None
    v_late = np.polyfit(tt[half], pos[half], 1)[0] if len(tt) > 20 else np.nan
    bp_v = np.arccos(min(1.0, abs(v) / (2 * np.sqrt(h))))
    eps_v = 8 * np.sqrt(h) * np.sin(bp_v)
    # shape fit on frame nearest mid-chain
    if len(tt):
        i_mid = np.argmin(np.abs(pos - N / 2))
        fi = np.argmin(np.abs(r["times"] - tt[i_mid]))
        bp_s, lam_s, rms = shape_fit(r["sz"][fi], pos[i_mid], bp_v, lam)
        eps_s = 8 * np.sqrt(h) * np.sin(bp_s)
        lam_pred = 1 / (np.sqrt(h) * np.sin(bp_s))
    else:
        bp_s = lam_s = rms = eps_s = lam_pred = np.nan
    print(f"h={h} tanb={tanb} (lam={lam:.2f}): v_tw={v_tw:.4f} v={v:.4f} v_late={v_late:.4f} "
          f"({100*(v-v_tw)/v_tw:+.2f}%)")
    print(f"   beta={beta:.4f} b'_v={bp_v:.4f} b'_s={bp_s:.4f} lam_s={lam_s:.3f} "
          f"(pred {lam_pred:.3f}) rms={rms:.4f}")
    print(f"   dE={r['dE']:.4f} eps(b'_v)={eps_v:.4f} ratio={r['dE']/eps_v:.3f}  "
          f"eps(b'_s)={eps_s:.4f} ratio_s={r['dE']/eps_s:.3f}  [{time.time()-t0:.1f}s]")

print("\n=== analytic-frame tracker sanity (velocity recovery, frozen oracle) ===")
h, tanb = 0.2, 2.0
beta = np.arctan(tanb)
lam = 1 / (np.sqrt(h) * np.sin(beta))
v_tw = 2 * np.sqrt(h) * np.cos(beta)
N = 400
times = np.arange(0, 800, 4.0)
sz = np.empty((len(times), N))
n = np.arange(N)
for i, t in enumerate(times):
    xi = (n - 100 - v_tw * t) / lam
    sz[i] = 1 - 2 * np.sin(beta) ** 2 / np.cosh(xi) ** 2
tt, pos, v = track(times, sz, N, lam, 0.2)
print(f"analytic frames: v={v:.6f} vs {v_tw:.6f}  rel err {abs(v-v_tw)/v_tw:.2e}")

print("\n=== generated-soliton qubit flip (criterion-8 style), T=0 ===")
t0 = time.time()
r = run_injection(500, 0.2, 2.0, 1500, qubit_site=250, qstride=25)
qts, qs = r["qts"], r["qspins"]
taus_frames = 0.2 * qts
dtau = 0.005
tau_grid = np.arange(taus_frames[0], taus_frames[-1] - 0.06, dtau)
a = np.array([0.0, 0.0, 1.0])
delta = mu = 1.0
azs = []
for tk in tau_grid:
    tmid = tk + dtau / 2
    j = np.searchsorted(taus_frames, tmid) - 1
    j = np.clip(j, 0, len(taus_frames) - 2)
    wgt = (tmid - taus_frames[j]) / (taus_frames[j + 1] - taus_frames[j])
    st = (1 - wgt) * qs[j] + wgt * qs[j + 1]
    a = rotate(a, np.array([0, 0, delta]) + mu * st, dtau)
    azs.append(a[2])
azs = np.array(azs)
print(f"T=0 generated: az_out = {azs[-1]:+.5f} (min {azs.min():+.5f}) |a|-1={np.linalg.norm(a)-1:.1e} "
      f"[{time.time()-t0:.1f}s]")

print("\n=== thermal seeds: detection at T=0.01 + qubit at T=0.002 (3 seeds each) ===")
for T, what in ((0.01, "detect"), (0.002, "qubit")):
    for seed in range(3):
        t0 = time.time()
        r = run_injection(500, 0.2, 2.0, 1500, T=T, seed=seed, qubit_site=250, qstride=25)
        lam = 1 / (np.sqrt(0.2) * np.sin(r["beta"]))
        tt, pos, v = track(r["times"], r["sz"], 500, lam, 0.2)
        reached = len(pos) > 0 and pos.max() >= 250
        qts, qs = r["qts"], r["qspins"]
        taus_frames = 0.2 * qts
        a = np.array([0.0, 0.0, 1.0])
        for tk in np.arange(taus_frames[0], taus_frames[-1] - 0.06, dtau):
            tmid = tk + dtau / 2
            j = np.clip(np.searchsorted(taus_frames, tmid) - 1, 0, len(taus_frames) - 2)
            wgt = (tmid - taus_frames[j]) / (taus_frames[j + 1] - taus_frames[j])
            st = (1 - wgt) * qs[j] + wgt * qs[j + 1]
            a = rotate(a, np.array([0, 0, 1.0]) + 1.0 * st, dtau)
        print(f"T={T} seed={seed}: reached250={reached} v={v:.4f} az_out={a[2]:+.4f} "
              f"[{time.time()-t0:.1f}s]")
