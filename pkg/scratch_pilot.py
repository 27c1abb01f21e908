"""Pilot numerics to settle design questions before building the package."""
import numpy as np

EVEN = slice(0, None, 2)
ODD = slice(1, None, 2)


def rotate(s, omega, dt):
    # ds/dt = s x omega -> exact rotation about omega_hat by angle -|omega| dt
    w = np.linalg.norm(omega, axis=-1, keepdims=True)
    safe = np.where(w > 0, w, 1.0)
    axis = omega / safe
    ang = -w[..., 0] * dt
    c = np.cos(ang)[..., None]
    si = np.sin(ang)[..., None]
    cross = np.cross(axis, s)
    dotp = np.sum(axis * s, axis=-1, keepdims=True)
    out = s * c + cross * si + axis * dotp * (1.0 - c)
    return np.where(w > 0, out, s)


def local_field(spins, h, s0=None):
    f = np.zeros_like(spins)
    f[..., :-1, :] += spins[..., 1:, :]
    f[..., 1:, :] += spins[..., :-1, :]
    if s0 is not None:
        f[..., 0, :] += s0
    f[..., 2] += h
    return f


def substep(spins, h, idx, dtsub, s0=None):
    f = local_field(spins, h, s0)
    spins[..., idx, :] = rotate(spins[..., idx, :], f[..., idx, :], dtsub)


def strang_step(spins, h, t, dt, drive=None):
    s0 = drive(t + dt / 4) if drive else None
    substep(spins, h, EVEN, dt / 2, s0)
    substep(spins, h, ODD, dt)
    s0 = drive(t + 3 * dt / 4) if drive else None
    substep(spins, h, EVEN, dt / 2, s0)


def energy(spins, h):
    bonds = -np.sum(spins[..., :-1, :] * spins[..., 1:, :], axis=(-1, -2))
    return bonds - h * np.sum(spins[..., 2], axis=-1)


def random_config(N, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(N, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


# ---------------------------------------------------------------- experiment 1
print("=== 1. energy conservation of even/odd splitting (undriven) ===")
for dt in (0.01, 0.005):
    s = random_config(64, seed=1)
    h = 0.2
    e0 = energy(s, h)
    worst = 0.0
    for k in range(20000):
        strang_step(s, h, k * dt, dt)
        if k % 50 == 0:
            worst = max(worst, abs(energy(s, h) - e0))
    worst = max(worst, abs(energy(s, h) - e0))
    nrm = np.abs(1.0 - np.linalg.norm(s, axis=-1)).max()
    print(f"dt={dt}: peak |E-E0| = {worst:.3e}   max |1-|s|| = {nrm:.3e}")

# ---------------------------------------------------------------- experiment 2
print("\n=== 2. thermal correlators: heat-bath vs harmonic oracle vs paper ===")
h, T, N = 0.2, 0.01, 500


def heat_bath(N, h, T, seed, sweeps=200):
    rng = np.random.default_rng(seed)
    s = np.zeros((N, 3))
    s[:, 2] = 1.0
    for _ in range(sweeps):
        for color in (EVEN, ODD):
            f = local_field(s, h)[color]
            w = np.linalg.norm(f, axis=-1, keepdims=True)
            a = w[:, 0] / T
            U = rng.random(len(a))
            u = 1.0 + np.log(U + (1.0 - U) * np.exp(-2.0 * a)) / a
            u = np.clip(u, -1.0, 1.0)
            psi = 2.0 * np.pi * rng.random(len(a))
            fhat = f / w
            e1 = np.cross(fhat, np.array([0.0, 0.0, 1.0]))
            n1 = np.linalg.norm(e1, axis=-1, keepdims=True)
            bad = n1[:, 0] < 1e-12
            e1[bad] = np.cross(fhat[bad], np.array([1.0, 0.0, 0.0]))
            n1 = np.linalg.norm(e1, axis=-1, keepdims=True)
            e1 /= n1
            e2 = np.cross(fhat, e1)
            r = np.sqrt(np.maximum(0.0, 1.0 - u * u))
            new = (u[:, None] * fhat + r[:, None] * (np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2))
            s[color] = new / np.linalg.norm(new, axis=-1, keepdims=True)
    return s


# harmonic oracle: M = h I + path laplacian; <u u^T> = T M^-1
L = np.zeros((N, N))
for n in range(N - 1):
    L[n, n] += 1; L[n + 1, n + 1] += 1
    L[n, n + 1] -= 1; L[n + 1, n] -= 1
M = h * np.eye(N) + L
C = T * np.linalg.inv(M)
inner = slice(10, N - 10)
onsite_oracle = np.diag(C)[inner].mean()
d = np.arange(N - 1)
nn_oracle = (np.diag(C)[:-1] + np.diag(C)[1:] - 2 * np.diag(C, 1))[10:N - 11].mean()
print(f"harmonic oracle: onsite = {onsite_oracle:.5f}  nn_diff = {nn_oracle:.5f}")
print(f"bulk formulas:   onsite = {T/np.sqrt(h*(h+4)):.5f}  nn_diff = {T*(1-np.sqrt(h/(h+4))):.5f}")
print(f"paper targets:   onsite = {T/np.sqrt(h):.5f}  nn_diff = {T:.5f}")

for sweeps in (100, 200, 400):
    ox, nx = [], []
    for seed in range(40):
        s = heat_bath(N, h, T, seed, sweeps)
        ox.append((s[inner, 0] ** 2).mean())
        nx.append(((s[:-1, 0] - s[1:, 0]) ** 2)[inner].mean())
    print(f"sweeps={sweeps}: onsite = {np.mean(ox):.5f} (se {np.std(ox)/np.sqrt(40):.2g})  "
          f"nn_diff = {np.mean(nx):.5f}")

# ---------------------------------------------------------------- experiment 3
print("\n=== 3. N=2 bond energy: heat-bath vs quadrature ===")


def bond_quadrature(h, T, nodes=160):
    x1, w1 = np.polynomial.legendre.leggauss(nodes)  # cos(theta1)
    x2, w2 = x1, w1
    p, wp = np.polynomial.legendre.leggauss(nodes)   # dphi over [0, 2pi]
    phi = np.pi * (p + 1.0)
    wphi = np.pi * wp
    c1 = x1[:, None, None]; c2 = x2[None, :, None]; dphi = phi[None, None, :]
    s1 = np.sqrt(1 - c1 ** 2); s2 = np.sqrt(1 - c2 ** 2)
    dot = s1 * s2 * np.cos(dphi) + c1 * c2
    expo = (dot + h * (c1 + c2)) / T
    expo -= expo.max()
    wgt = np.exp(expo) * w1[:, None, None] * w2[None, :, None] * wphi[None, None, :]
    return -(dot * wgt).sum() / wgt.sum()


for T2 in (0.25, 0.01):
    exact = bond_quadrature(0.2, T2)
    vals = []
    for seed in range(60):
        s = heat_bath(2, 0.2, T2, seed, sweeps=300)
        vals.append(-np.dot(s[0], s[1]))
    mean = np.mean(vals); se = np.std(vals, ddof=1) / np.sqrt(60)
    print(f"T={T2}: quad = {exact:.6f}  sampled = {mean:.6f} +- {se:.2g}  |z| = {abs(mean-exact)/se:.2f}")

# ---------------------------------------------------------------- experiment 4
print("\n=== 4. injection: velocity + beta' for three soliton widths ===")


def tw_profile(beta, xi, phi0=0.0):
    xi = np.asarray(xi, dtype=float)
    sech = 2 * np.exp(-np.abs(xi)) / (1 + np.exp(-2 * np.abs(xi)))
    theta = 2 * np.arcsin(np.sin(beta) * sech)
    phi = phi0 + xi / np.tan(beta) + np.arctan(np.tan(beta) * np.tanh(xi))
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def inject(N, h, tanb, t_end, dt=0.01, stride=100):
    beta = np.arctan(tanb)
    lam = 1 / (np.sqrt(h) * np.sin(beta))
    tau = 1 / (h * np.sin(2 * beta))
    v = 2 * np.sqrt(h) * np.cos(beta)
    XI = 12.0
    t_on, t_off = -XI * tau, XI * tau

    def drive(t):
        if t <= t_on or t >= t_off:
            return np.array([0.0, 0.0, 1.0])
        return tw_profile(beta, -t / tau)

    s = np.zeros((N, 3)); s[:, 2] = 1.0
    e0 = energy(s, h)
    t = t_on
    ts, zmins, pos = [], [], []
    k = 0
    while t < t_end:
        strang_step(s, h, t, dt, drive)
        t += dt; k += 1
        if k % stride == 0:
            z = s[:, 2]
            i = np.argmin(z)
            if 0 < i < N - 1:
                den = z[i - 1] - 2 * z[i] + z[i + 1]
                off = 0.5 * (z[i - 1] - z[i + 1]) / den if den != 0 else 0.0
            else:
                off = 0.0
            ts.append(t); zmins.append(z[i]); pos.append(i + off)
    ts, zmins, pos = map(np.asarray, (ts, zmins, pos))
    margin = 5 * lam
    ok = (zmins < 0.9) & (pos > margin) & (pos < N - margin)
    slope = np.polyfit(ts[ok], pos[ok], 1)[0] if ok.sum() > 10 else np.nan
    dE = energy(s, h) - e0
    bp = np.arccos(min(1.0, abs(slope) / (2 * np.sqrt(h))))
    eps_bp = 8 * np.sqrt(h) * np.sin(bp)
    print(f"h={h} tanb={tanb}: v_tw={v:.4f} v_meas={slope:.4f} ({100*(slope-v)/v:+.2f}%)  "
          f"beta={beta:.4f} beta'={bp:.4f} gap={beta-bp:.4f}  dE={dE:.4f} eps(b')={eps_bp:.4f} "
          f"ratio={dE/eps_bp:.3f}  usable={ok.sum()}")
    return s


inject(1000, 0.05, 0.2, t_end=900)
inject(300, 0.05, 2.0, t_end=1000)
inject(300, 1.0, 3.0, t_end=250)
inject(500, 0.2, 2.0, t_end=1200)

# ---------------------------------------------------------------- experiment 5
print("\n=== 5. qubit flip, analytic TW source, alpha=0, delta=mu=1 ===")


def evolve_qubit(beta, h, delta=1.0, mu=1.0, dtau=0.005, XI=12.0):
    s2b = np.sin(2 * beta)
    tau_span = XI / s2b
    taus = np.arange(-tau_span, tau_span, dtau)
    a = np.array([0.0, 0.0, 1.0])
    for t in taus:
        st = tw_profile(beta, -(t + dtau / 2) * s2b)
        om = np.array([0.0, 0.0, delta]) + mu * st
        a = rotate(a, om, dtau)
    return a


for tanb in (0.5, 1.0, 2.0):
    beta = np.arctan(tanb)
    a = evolve_qubit(beta, 0.2)
    print(f"tanb={tanb}: a_out = {a}, az_out = {a[2]:+.6f}, |a|-1 = {np.linalg.norm(a)-1:.2e}")
for b in (0.3, 0.6, 0.9, 1.1):
    a = evolve_qubit(b, 0.2)
    print(f"beta={b}: az_out = {a[2]:+.8f}")
