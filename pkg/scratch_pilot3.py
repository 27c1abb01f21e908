"""Pilot 3 (uses the real package): settled wide-case tracking, transit-local
qubit windows at finite T, detection statistics, decaying drive."""
import time
import numpy as np

import spinwire as sw
from spinwire.tracker import fit_profile

# ---------------------------------------------------------------- A: wide case settled
print("=== A: wide soliton, settled measurement ===")
t0 = time.time()
p = sw.ChainParams(N=1000, h=0.05)
spec = sw.SolitonSpec.from_tan(0.2)
drv = sw.make_drive(spec, 0.05)
sc = sw.tw_scales(spec.beta, 0.05)
print(f"beta={spec.beta:.5f} lam={sc.lam:.3f} tau={sc.tau:.2f} v={sc.v:.5f} "
      f"window=[{drv.t_on:.0f},{drv.t_off:.0f}]")
traj = sw.run_injection(p, drv, sw.ground_state(p), t_end=2100.0, dt=0.01, sample_stride=200)
print(f"run: {time.time()-t0:.1f}s")
thr = 1 - 0.5 * np.sin(spec.beta) ** 2
for tmin in (None, 700.0, 1100.0):
    tr = sw.track_core(traj if tmin is None else traj.window(t_min=tmin), threshold=thr)
    tr = sw.estimate_beta_eff(traj if tmin is None else traj.window(t_min=tmin), tr)
    dE = traj.ledger.E_final - traj.ledger.E_initial
    eps_v = 8 * np.sqrt(0.05) * np.sin(tr.beta_eff_velocity)
    eps_s = 8 * np.sqrt(0.05) * np.sin(tr.beta_eff_shape)
    print(f"tmin={tmin}: v={tr.velocity:.5f} ({100*(tr.velocity-sc.v)/sc.v:+.2f}%) "
          f"b'_v={tr.beta_eff_velocity:.5f} b'_s={tr.beta_eff_shape:.5f} lam_s={tr.lambda_shape:.2f} "
          f"rms={tr.shape_residual:.5f}")
    print(f"   dE={dE:.5f} work={traj.ledger.work_integral:.5f} "
          f"ratio_v={dE/eps_v:.4f} ratio_s={dE/eps_s:.4f}")

# late-frame shape fit (settled region, core far from boundary)
tr_all = sw.estimate_beta_eff(traj, sw.track_core(traj, threshold=thr))
for frac in (0.5, 0.75, 0.95):
    k = int(frac * (len(tr_all.times) - 1))
    fi = int(np.argmin(np.abs(traj.times - tr_all.times[k])))
    b_s, lam_s, n0, rms = fit_profile(traj.sz[fi], tr_all.positions[k],
                                      tr_all.beta_eff_velocity, sc.lam)
    print(f"frame@{frac:.2f} (t={traj.times[fi]:.0f}, n0={n0:.1f}): "
          f"b'_s={b_s:.5f} (beta={spec.beta:.5f}) lam_s={lam_s:.2f} rms={rms:.6f}")

# ---------------------------------------------------------------- B: qubit at T=0.002
print("\n=== B: generated-soliton qubit flip with transit-local window ===")
p5 = sw.ChainParams(N=500, h=0.2)
spec5 = sw.SolitonSpec.from_tan(2.0)
drv5 = sw.make_drive(spec5, 0.2)
qp = sw.QubitParams(delta=1.0, mu=1.0, alpha=0.0, qubit_site=250)

def qubit_run(T, seed, dt):
    if T == 0:
        init = sw.ground_state(p5)
    else:
        init = sw.sample_thermal(p5, sw.ThermalSpec(T, seed))
    traj = sw.run_injection(p5, drv5, init, t_end=1500.0, dt=dt, sample_stride=200,
                            probe_sites=[248, 249, 250, 251, 252], probe_stride=max(1, int(25 * 0.01/dt)))
    tr = sw.track_core(traj, threshold=0.2)
    # transit time at the qubit site
    k = int(np.argmin(np.abs(tr.positions - 250)))
    t_arr = tr.times[k]
    tau_arr = 0.2 * t_arr
    span = (tau_arr - 25.0, tau_arr + 35.0)
    bt = sw.evolve_qubit(traj.probe, qp, tau_span=span, dtau=0.005, h=0.2)
    asym = sw.extract_asymptotics(bt, qp, window=(tau_arr + 20.0, tau_arr + 35.0))
    return asym, np.abs(np.linalg.norm(bt.a, axis=1) - 1).max()

t0 = time.time()
asym, nd = qubit_run(0.0, 0, 0.01)
print(f"T=0: az_out={asym.az_out:+.5f} omega={asym.omega:.5f} aperp={asym.aperp_out:.5f} "
      f"norm_dev={nd:.1e} [{time.time()-t0:.0f}s]")
azs = []
for seed in range(6):
    t0 = time.time()
    asym, nd = qubit_run(0.002, seed, 0.02)
    azs.append(asym.az_out)
    print(f"T=0.002 seed={seed}: az_out={asym.az_out:+.4f} [{time.time()-t0:.0f}s]")
print(f"mean az_out over 6 seeds: {np.mean(azs):+.4f}")

# ---------------------------------------------------------------- C: detection stats
print("\n=== C: detection at T in {0.002, 0.01}, dt=0.02, batch of 20 ===")
from spinwire.tracker import core_positions_z
for T in (0.002, 0.01):
    t0 = time.time()
    inits = sw.sample_thermal_ensemble(p5, T, seeds=range(20))
    br = sw.run_injection_batch(p5, drv5, inits, t_end=1500.0, dt=0.02, sample_stride=100)
    lam5 = sw.tw_scales(spec5.beta, 0.2).lam
    nreach = 0
    for b in range(20):
        tt, pos = core_positions_z(br.times, br.sz[b], threshold=0.2, end_margin=5*lam5)
        if len(pos) and pos.max() >= 250:
            nreach += 1
    print(f"T={T}: reached site 250 in {nreach}/20 [{time.time()-t0:.0f}s]")

# ---------------------------------------------------------------- D: decaying drive
print("\n=== D: decaying drive (ell=5) generates a tracked soliton ===")
t0 = time.time()
drv_d = sw.make_drive(spec5, 0.2, kind="decaying-tw", ell=5.0)
traj_d = sw.run_injection(p5, drv_d, sw.ground_state(p5), t_end=1200.0, dt=0.01,
                          sample_stride=200)
try:
    tr = sw.track_core(traj_d, threshold=0.9)
    tr = sw.estimate_beta_eff(traj_d, tr)
    print(f"detected: v={tr.velocity:.4f} b'_v={tr.beta_eff_velocity:.4f} "
          f"b'_s={tr.beta_eff_shape:.4f} dE={traj_d.ledger.E_final-traj_d.ledger.E_initial:.4f} "
          f"work={traj_d.ledger.work_integral:.4f} [{time.time()-t0:.0f}s]")
except sw.DetectionError as e:
    print("NOT detected:", e)
