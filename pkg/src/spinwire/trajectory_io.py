"""Trajectory persistence: a binary frame file plus a readable sidecar, and
the long-form density CSV.

Binary layout: 8-byte magic, uint32 little-endian header length, UTF-8 JSON
header (N, dt, stride, t_start, n_frames, chain params, drive descriptor,
energy ledger), then n_frames blocks of 3N little-endian float64 each.  The
drive record is reconstructed from the descriptor on load.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .chain import ChainParams
from .dynamics import DriveProtocol, EnergyLedger, Trajectory
from .errors import ConfigError
from .soliton import SolitonSpec

MAGIC = b"SWTRAJ1\x00"


def drive_to_dict(drive: DriveProtocol) -> dict:
    d = {"kind": drive.kind, "h": drive.h, "window_xi": drive.window_xi,
         "ell": drive.ell}
    if drive.spec is not None:
        d.update(beta=drive.spec.beta, phi0=drive.spec.phi0,
                 direction=drive.spec.direction)
    return d


def drive_from_dict(d: dict) -> DriveProtocol:
    spec = None
    if "beta" in d:
        spec = SolitonSpec(beta=d["beta"], phi0=d.get("phi0", 0.0),
                           direction=d.get("direction", 1))
    return DriveProtocol(kind=d["kind"], spec=spec, h=d["h"],
                         window_xi=d.get("window_xi", 12.0), ell=d.get("ell"))


def save_trajectory(traj: Trajectory, path) -> Path:
    path = Path(path)
    header = {
        "N": traj.params.N,
        "h": traj.params.h,
        "dt": traj.dt,
        "stride": traj.stride,
        "t_start": float(traj.times[0]),
        "n_frames": int(len(traj.times)),
        "drive": drive_to_dict(traj.drive),
        "ledger": {
            "E_initial": traj.ledger.E_initial,
            "E_final": traj.ledger.E_final,
            "work_integral": traj.ledger.work_integral,
        },
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(traj.frames, dtype="<f8").tobytes())
    with open(path.with_suffix(path.suffix + ".meta"), "w") as fh:
        json.dump(header, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def load_trajectory(path) -> Trajectory:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ConfigError(f"{path} is not a trajectory file (bad magic)")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        raw = fh.read()
    N = header["N"]
    F = header["n_frames"]
    frames = np.frombuffer(raw, dtype="<f8", count=F * N * 3).reshape(F, N, 3).copy()
    dt, stride = header["dt"], header["stride"]
    times = header["t_start"] + dt * stride * np.arange(F)
    drive = drive_from_dict(header["drive"])
    led = header["ledger"]
    return Trajectory(
        times=times, frames=frames, drive_record=drive.s0(times),
        ledger=EnergyLedger(**led), params=ChainParams(N=N, h=header["h"]),
        drive=drive, dt=dt, stride=stride)


def write_density_csv(traj: Trajectory, path) -> Path:
    """Long-form (t, n, s^z) rows for density plots."""
    path = Path(path)
    F, N = traj.sz.shape
    with open(path, "w", newline="") as fh:
        fh.write("t,n,sz\n")
        for i in range(F):
            t = repr(float(traj.times[i]))
            row = traj.sz[i]
            fh.writelines(f"{t},{n},{row[n]!r}\n" for n in range(N))
    return path


def write_density_svg(traj: Trajectory, path, max_cells: int = 200) -> Path:
    """Self-contained SVG heatmap of s^z(t, n), downsampled to at most
    max_cells per axis.  White -> green -> blue with decreasing s^z."""
    path = Path(path)
    sz = traj.sz
    F, N = sz.shape
    ti = np.linspace(0, F - 1, min(F, max_cells)).astype(int)
    ni = np.linspace(0, N - 1, min(N, max_cells)).astype(int)
    grid = sz[np.ix_(ti, ni)]

    def color(z):
        # z in [-1, 1]: 1 -> white, 0 -> green, -1 -> blue
        x = (1.0 - float(z)) / 2.0  # 0 at z=1, 1 at z=-1
        if x < 0.5:
            f = x / 0.5
            r, g, b = 255 - int(155 * f), 255, 255 - int(155 * f)
        else:
            f = (x - 0.5) / 0.5
            r, g, b = int(100 * (1 - f)), int(255 - 155 * f), int(100 + 155 * f)
        return f"rgb({r},{g},{b})"

    w, hgt = 800, 500
    cw, ch = w / len(ti), hgt / len(ni)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{hgt}" '
             f'viewBox="0 0 {w} {hgt}">']
    for i in range(len(ti)):
        for j in range(len(ni)):
            x = i * cw
            y = hgt - (j + 1) * ch
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.5:.2f}" '
                         f'height="{ch + 0.5:.2f}" fill="{color(grid[i, j])}"/>')
    parts.append("</svg>")
    path.write_text("\n".join(parts))
    return path
