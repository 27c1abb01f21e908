"""Config-driven experiment runner: thermalize -> inject -> track -> qubit ->
export, plus the sweep engine and figure-data exporters.

The config is a single nested document (YAML on disk, JSON over the service)
validated by pydantic with unknown keys rejected.  Every run writes a manifest
listing each artifact with its size and sha256; identical configs and seeds
reproduce byte-identical CSV outputs.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .chain import ChainParams, chain_energy, ground_state
from .dynamics import DriveProtocol, Trajectory, make_drive, run_injection
from .errors import ConfigError, DetectionError, NumericalError, SpinwireError
from .qubit import (AsymptoticState, CouplingProfile, QubitParams, backaction_ratio,
                    evolve_qubit, extract_asymptotics, write_asymptotics)
from .soliton import SolitonSpec, tw_scales
from .thermal import ThermalSpec, sample_thermal
from .tracker import TrackResult, estimate_beta_eff, track_core
from .trajectory_io import (load_trajectory, save_trajectory, write_density_csv,
                            write_density_svg)

SCHEMA_VERSION = 1


# ------------------------------------------------------------------- config

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ChainSection(_Section):
    N: int = Field(ge=2)
    h: float = Field(ge=0.0)


class DriveSection(_Section):
    kind: str = "ideal-tw"
    beta: Optional[float] = None
    tan_beta: Optional[float] = None
    phi0: float = 0.0
    window_xi: float = 12.0
    ell: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind not in ("ideal-tw", "decaying-tw", "none"):
            raise ValueError(f"unknown drive kind {self.kind!r}")
        if self.kind != "none":
            if (self.beta is None) == (self.tan_beta is None):
                raise ValueError("specify exactly one of beta / tan_beta")
        return self

    def spec(self) -> SolitonSpec | None:
        if self.kind == "none":
            return None
        if self.beta is not None:
            return SolitonSpec(beta=self.beta, phi0=self.phi0)
        return SolitonSpec.from_tan(self.tan_beta, phi0=self.phi0)


class ThermalSection(_Section):
    T_red: float = 0.0
    seed: int = 0
    sweeps: int = 200


class QubitSection(_Section):
    delta: float = 1.0
    mu: float = 1.0
    alpha: float = 0.0
    site: int = 0
    dtau: float = 0.005
    tau_before: float = 25.0   # qubit switch-on lead before core arrival
    tau_after: float = 35.0    # integration continued past arrival
    asym_window: float = 15.0  # trailing window used for the asymptotic fit
    # post-transit field check: generated solitons ring at ~1e-2 and thermal
    # noise floors scale like sqrt(T); None auto-scales 0.02 + 8 sqrt(T)
    asym_field_tol: Optional[float] = None
    S_over_hbar: float = 1.0


class TrackingSection(_Section):
    threshold: float = 0.9
    end_margin: Optional[float] = None


class ExportsSection(_Section):
    density: bool = True
    heatmap: bool = False
    bloch: bool = True
    timeseries: bool = True


class RunSection(_Section):
    dt: float = 0.01
    t_end: float
    sample_stride: Optional[int] = None
    seeds: list[int] = Field(default_factory=lambda: [0])
    output_dir: Optional[str] = None
    integrator_order: int = 2
    tracking: TrackingSection = Field(default_factory=TrackingSection)
    exports: ExportsSection = Field(default_factory=ExportsSection)


class ExperimentConfig(_Section):
    schema_version: int = SCHEMA_VERSION
    chain: ChainSection
    drive: DriveSection
    thermal: ThermalSection = Field(default_factory=ThermalSection)
    qubit: Optional[QubitSection] = None
    run: RunSection

    @model_validator(mode="after")
    def _check(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version} "
                             f"(this build reads {SCHEMA_VERSION})")
        return self

    def digest(self) -> str:
        blob = json.dumps(self.model_dump(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(data)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except Exception as e:
        raise ConfigError(f"invalid config: {e}") from e


def save_config(config: ExperimentConfig, path):
    with open(path, "w") as fh:
        yaml.safe_dump(config.model_dump(), fh, sort_keys=True)


# ------------------------------------------------------------------ manifest

class Bundle:
    """Output directory plus the manifest ledger; the only place artifacts are
    registered, so the manifest is complete by construction."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.entries: list[tuple[str, int, str]] = []
        self.failure: str | None = None

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def register(self, path: Path) -> Path:
        rel = path.relative_to(self.root).as_posix()
        data = path.read_bytes()
        self.entries.append((rel, len(data), hashlib.sha256(data).hexdigest()))
        return path

    def mark_failure(self, stage: str, err: Exception, digest: str):
        kind = getattr(err, "kind", "error")
        self.failure = f"FAILED stage={stage} kind={kind} digest={digest} message={err}"

    def write_manifest(self) -> Path:
        p = self.root / "manifest.txt"
        with open(p, "w") as fh:
            for rel, size, sha in sorted(self.entries):
                fh.write(f"{rel} {size} {sha}\n")
            if self.failure:
                fh.write(self.failure + "\n")
        return p


class _Stage:
    """Context manager tagging errors with the stage name and config digest."""

    def __init__(self, name: str, bundle: Bundle, digest: str):
        self.name = name
        self.bundle = bundle
        self.digest = digest

    def __enter__(self):
        return self

    def __exit__(self, etype, err, tb):
        if err is not None and isinstance(err, SpinwireError):
            self.bundle.mark_failure(self.name, err, self.digest)
            self.bundle.write_manifest()
            err.args = (f"[stage={self.name} digest={self.digest}] {err}",)
        return False


# ------------------------------------------------------------------- runner

_SUMMARY_FIELDS = [
    "seed", "detected", "velocity", "beta_eff_velocity", "beta_eff_shape",
    "lambda_shape", "shape_residual", "delta_E", "work_integral",
    "eps_beta_eff", "az_out", "aperp_out", "omega", "phi", "backaction",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _probe_plan(cfg: ExperimentConfig) -> tuple[list[int] | None, int]:
    """Sites and stride for the fine-grained qubit replay record."""
    if cfg.qubit is None:
        return None, 0
    q = cfg.qubit
    profile = CouplingProfile.gaussian(q.alpha)
    sites = (q.site + profile.offsets).tolist()
    if min(sites) < 0 or max(sites) >= cfg.chain.N:
        raise ConfigError("qubit coupling window exceeds chain bounds")
    fmax = abs(q.mu) + abs(q.delta)
    if cfg.chain.h <= 0:
        raise ConfigError("qubit replay needs h > 0 for the tau mapping")
    max_dt_tau = 0.1 / max(fmax, 1e-12)
    stride = max(1, int(math.floor(max_dt_tau / (cfg.chain.h * cfg.run.dt))))
    return sites, stride


def _arrival_time(track: TrackResult, site: int) -> float:
    """First tracked crossing of `site` (linear interpolation)."""
    pos = track.positions
    above = np.nonzero(pos >= site)[0]
    if len(above) == 0:
        raise DetectionError(f"tracked core never reaches site {site}")
    j = above[0]
    if j == 0:
        return float(track.times[0])
    t0, t1 = track.times[j - 1], track.times[j]
    p0, p1 = pos[j - 1], pos[j]
    if p1 == p0:
        return float(t1)
    return float(t0 + (site - p0) * (t1 - t0) / (p1 - p0))


def replay_qubit(traj: Trajectory, q: QubitSection, track: TrackResult,
                 T_red: float = 0.0):
    """Evolve the qubit against a recorded run over a transit-local window.

    The window is anchored at the tracked first crossing of the qubit site;
    the qubit starts polarized +z a lead time before arrival.  Returns
    (bloch trajectory, asymptotics, arrival tau)."""
    h = traj.drive.h if traj.drive.kind != "none" else traj.params.h
    qp = QubitParams(delta=q.delta, mu=q.mu, alpha=q.alpha, qubit_site=q.site)
    t_arr = _arrival_time(track, q.site)
    tau_arr = h * t_arr
    source = traj.probe if traj.probe is not None else traj
    bt = evolve_qubit(source, qp, tau_span=(tau_arr - q.tau_before,
                                            tau_arr + q.tau_after),
                      dtau=q.dtau, h=h)
    ftol = q.asym_field_tol
    if ftol is None:
        ftol = 0.02 + 8.0 * math.sqrt(max(T_red, 0.0))
    asym = extract_asymptotics(bt, qp,
                               window=(tau_arr + q.tau_after - q.asym_window,
                                       tau_arr + q.tau_after),
                               field_tol=ftol)
    return bt, asym, tau_arr


def _run_seed(cfg: ExperimentConfig, seed: int, bundle: Bundle, digest: str) -> dict:
    chain = ChainParams(N=cfg.chain.N, h=cfg.chain.h)
    drive = make_drive(cfg.drive.spec(), cfg.chain.h, kind=cfg.drive.kind,
                       ell=cfg.drive.ell, window_xi=cfg.drive.window_xi)
    row: dict[str, Any] = {k: None for k in _SUMMARY_FIELDS}
    row["seed"] = seed
    sub = f"seed_{seed}"

    with _Stage("thermalize", bundle, digest):
        initial = sample_thermal(chain, ThermalSpec(cfg.thermal.T_red, seed,
                                                    cfg.thermal.sweeps))

    probe_sites, probe_stride = _probe_plan(cfg)
    with _Stage("inject", bundle, digest):
        traj = run_injection(chain, drive, initial, t_end=cfg.run.t_end,
                             dt=cfg.run.dt, sample_stride=cfg.run.sample_stride,
                             probe_sites=probe_sites, probe_stride=probe_stride,
                             order=cfg.run.integrator_order)
        bundle.register(save_trajectory(traj, bundle.path(sub, "trajectory.traj")))
        meta = bundle.path(sub, "trajectory.traj.meta")
        if meta.exists():
            bundle.register(meta)
        if cfg.run.exports.density:
            bundle.register(write_density_csv(traj, bundle.path(sub, "density.csv")))
        if cfg.run.exports.heatmap:
            bundle.register(write_density_svg(traj, bundle.path(sub, "heatmap.svg")))
    row["delta_E"] = traj.ledger.E_final - traj.ledger.E_initial
    row["work_integral"] = traj.ledger.work_integral

    with _Stage("track", bundle, digest):
        track = track_core(traj, threshold=cfg.run.tracking.threshold,
                           end_margin=cfg.run.tracking.end_margin)
        track = estimate_beta_eff(traj, track)
        track.write_record(bundle.path(sub, "track.txt"))
        bundle.register(bundle.path(sub, "track.txt"))
        track.write_positions_csv(bundle.path(sub, "core_positions.csv"))
        bundle.register(bundle.path(sub, "core_positions.csv"))
    row.update(detected=True, velocity=track.velocity,
               beta_eff_velocity=track.beta_eff_velocity,
               beta_eff_shape=track.beta_eff_shape,
               lambda_shape=track.lambda_shape,
               shape_residual=track.shape_residual,
               eps_beta_eff=8.0 * math.sqrt(chain.h) * math.sin(track.beta_eff_velocity))

    if cfg.qubit is not None:
        q = cfg.qubit
        with _Stage("qubit", bundle, digest):
            qp = QubitParams(delta=q.delta, mu=q.mu, alpha=q.alpha, qubit_site=q.site)
            row["backaction"] = backaction_ratio(qp, drive.spec.beta, chain.h,
                                                 q.S_over_hbar)
            bt, asym, _ = replay_qubit(traj, q, track, T_red=cfg.thermal.T_red)
            bt.write_csv(bundle.path(sub, "qubit.csv"))
            bundle.register(bundle.path(sub, "qubit.csv"))
            write_asymptotics(asym, bundle.path(sub, "asymptotics.txt"))
            bundle.register(bundle.path(sub, "asymptotics.txt"))
            if cfg.run.exports.bloch:
                bundle.register(_write_bloch_csv(bt, bundle.path(sub, "bloch.csv")))
            if cfg.run.exports.timeseries:
                bundle.register(_write_timeseries_csv(bt, bundle.path(sub, "timeseries.csv")))
        row.update(az_out=asym.az_out, aperp_out=asym.aperp_out,
                   omega=asym.omega, phi=asym.phi)
    return row


def run_experiment(config: ExperimentConfig, base_dir: Path | str = ".") -> dict:
    """Execute the configured pipeline for every seed; returns a summary dict
    with the output directory, per-seed rows and the manifest path."""
    if config.drive.kind == "none":
        raise ConfigError("run_experiment needs a driven config "
                          "(use the thermal tools for undriven sampling)")
    digest = config.digest()
    out = config.run.output_dir or f"runs/exp-{digest}"
    root = Path(base_dir) / out
    bundle = Bundle(root)
    save_config(config, bundle.path("config.yaml"))
    bundle.register(bundle.path("config.yaml"))

    rows = [_run_seed(config, seed, bundle, digest) for seed in config.run.seeds]

    spath = bundle.path("summary.csv")
    with open(spath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_SUMMARY_FIELDS)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in _SUMMARY_FIELDS])
    bundle.register(spath)
    manifest = bundle.write_manifest()
    return {"output_dir": str(root), "digest": digest, "rows": rows,
            "manifest": str(manifest)}


def _write_bloch_csv(bt, path) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write("ax,ay,az\n")
        for k in range(len(bt.taus)):
            fh.write(f"{bt.a[k,0]!r},{bt.a[k,1]!r},{bt.a[k,2]!r}\n")
    return path


def _write_timeseries_csv(bt, path) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write("tau,az,stilde_z\n")
        for k in range(len(bt.taus)):
            fh.write(f"{bt.taus[k]!r},{bt.a[k,2]!r},{bt.stilde[k,2]!r}\n")
    return path


# -------------------------------------------------------------------- sweep

MAX_SWEEP_CELLS = 256


def _set_path(data: dict, dotted: str, value):
    parts = dotted.split(".")
    node = data
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node or node[p] is None:
            raise ConfigError(f"sweep axis {dotted!r} does not match a config path")
        node = node[p]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"sweep axis {dotted!r} does not match a config path")
    node[parts[-1]] = value


def _sweep_cell(args):
    cfg_data, axes_names, values, index, out_root = args
    data = json.loads(json.dumps(cfg_data))
    for name, v in zip(axes_names, values):
        _set_path(data, name, v)
    if "thermal.seed" not in axes_names:
        seed = int(np.random.SeedSequence(entropy=data["thermal"]["seed"],
                                          spawn_key=(index,)).generate_state(1)[0])
        data["thermal"]["seed"] = seed
        data["run"]["seeds"] = [seed]
    data["run"]["output_dir"] = f"cells/cell_{index:04d}"
    row = {"cell": index, **{n: v for n, v in zip(axes_names, values)}}
    try:
        cfg = parse_config(data)
        res = run_experiment(cfg, base_dir=out_root)
        r = res["rows"][0]
        row.update(status="ok", error="", beta_eff=r["beta_eff_velocity"],
                   delta_E=r["delta_E"], az_out=r["az_out"], omega=r["omega"],
                   velocity=r["velocity"])
    except SpinwireError as e:
        row.update(status=f"error:{getattr(e, 'kind', 'error')}", error=str(e),
                   beta_eff=None, delta_E=None, az_out=None, omega=None,
                   velocity=None)
    return row


def sweep_grid(base: ExperimentConfig, axes: dict[str, list], out_dir,
               workers: int = 1, max_cells: int = MAX_SWEEP_CELLS) -> dict:
    """Cartesian-product sweep; one run_experiment per cell, one row per cell.

    Per-cell failures are recorded in-row and the sweep continues.  Cells get
    independent derived seeds unless thermal.seed is itself an axis.
    """
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    names = list(axes.keys())
    lists = [list(axes[n]) for n in names]
    base_data = base.model_dump()
    for n in names:  # fail fast on bad paths before launching runs
        _set_path(json.loads(json.dumps(base_data)), n, lists[names.index(n)][0])
    combos = list(itertools.product(*lists)) if names else [()]
    if len(combos) > max_cells:
        raise ConfigError(f"sweep grid has {len(combos)} cells, limit is {max_cells}")

    tasks = [(base_data, names, values, i, str(out_root))
             for i, values in enumerate(combos)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]

    cols = ["cell", *names, "status", "error", "velocity", "beta_eff", "delta_E",
            "az_out", "omega"]
    table = out_root / "sweep.csv"
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in cols])
    return {"rows": rows, "csv": str(table), "cells": len(rows)}


# ------------------------------------------------------------------- export

EXPORT_KINDS = ("density", "bloch", "timeseries")


def export_figure_data(bundle_dir, kind: str, seed: int | None = None,
                       heatmap: bool = False) -> list[str]:
    """Regenerate figure CSVs from a persisted bundle.

    density: (t, n, s^z) long form (+ optional SVG heatmap); bloch: Bloch-path
    (ax, ay, az); timeseries: (tau, a^z, s_tilde^z).
    """
    root = Path(bundle_dir)
    if kind not in EXPORT_KINDS:
        raise ConfigError(f"unknown export kind {kind!r}; choose from {EXPORT_KINDS}")
    seeds = sorted(root.glob("seed_*"))
    if seed is not None:
        seeds = [root / f"seed_{seed}"]
    if not seeds or not seeds[0].exists():
        raise ConfigError(f"no seed outputs found under {root}")
    written = []
    for sdir in seeds:
        if kind == "density":
            tpath = sdir / "trajectory.traj"
            if not tpath.exists():
                raise ConfigError(f"missing trajectory file {tpath}")
            traj = load_trajectory(tpath)
            written.append(str(write_density_csv(traj, sdir / "density.csv")))
            if heatmap:
                written.append(str(write_density_svg(traj, sdir / "heatmap.svg")))
        else:
            qpath = sdir / "qubit.csv"
            if not qpath.exists():
                raise ConfigError(f"missing qubit record {qpath} (no qubit stage?)")
            taus, a, st = _read_qubit_csv(qpath)
            if kind == "bloch":
                out = sdir / "bloch.csv"
                with open(out, "w", newline="") as fh:
                    fh.write("ax,ay,az\n")
                    for k in range(len(taus)):
                        fh.write(f"{a[k,0]!r},{a[k,1]!r},{a[k,2]!r}\n")
            else:
                out = sdir / "timeseries.csv"
                with open(out, "w", newline="") as fh:
                    fh.write("tau,az,stilde_z\n")
                    for k in range(len(taus)):
                        fh.write(f"{taus[k]!r},{a[k,2]!r},{st[k,2]!r}\n")
            written.append(str(out))
    return written


def _read_qubit_csv(path):
    rows = np.genfromtxt(path, delimiter=",", skip_header=1)
    if rows.ndim == 1:
        rows = rows[None]
    taus = rows[:, 0]
    a = rows[:, 1:4]
    st = rows[:, 4:7]
    return taus, a, st
