"""HTTP service wrapping the simulation package.

All endpoints are synchronous (runs are desk scale, seconds to a couple of
minutes) and write artifacts server-side under the request's output paths.
Errors are returned as a uniform envelope {"error": {"kind", "message"}} whose
kind maps onto the CLI exit codes: config -> 2, numerical -> 3,
detection -> 4.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..chain import ChainParams, PhysicalUnits, to_physical_units
from ..errors import ConfigError, DetectionError, NumericalError, SpinwireError
from ..experiment import (export_figure_data, replay_qubit, run_experiment,
                          sweep_grid)
from ..qubit import (AnalyticSolitonField, CouplingProfile, QubitParams,
                     backaction_ratio, evolve_qubit, extract_asymptotics,
                     write_asymptotics)
from ..soliton import SolitonSpec, tw_scales
from ..thermal import ThermalSpec, sample_thermal, thermal_diagnostics
from ..tracker import track_core
from ..trajectory_io import load_trajectory
from . import schemas as sc

_STATUS = {"config": 400, "detection": 422, "numerical": 500}


def create_app() -> FastAPI:
    app = FastAPI(title="spinwire", version=__version__,
                  description="soliton injection, tracking and qubit control "
                              "on a classical spin chain")

    @app.exception_handler(SpinwireError)
    async def _spinwire_error(request: Request, exc: SpinwireError):
        kind = getattr(exc, "kind", "numerical")
        return JSONResponse(status_code=_STATUS.get(kind, 500),
                            content={"error": {"kind": kind, "message": str(exc)}})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": {"kind": "config", "message": str(exc)}})

    @app.get("/health", response_model=sc.HealthResponse)
    def health():
        return sc.HealthResponse(status="ok", version=__version__)

    @app.post("/scales", response_model=sc.ScalesResponse)
    def scales(req: sc.ScalesRequest):
        beta = req.beta if req.beta is not None else math.atan(req.tan_beta)
        s = tw_scales(beta, req.h)
        physical = None
        if req.phys is not None:
            phys = PhysicalUnits(JS2_kelvin=req.phys.JS2_kelvin,
                                 S_over_hbar=req.phys.S_over_hbar)
            if req.N is not None:
                est = to_physical_units(ChainParams(N=req.N, h=req.h), phys, s)
                physical = sc.PhysicalOut(
                    velocity_spacings_per_s=est.velocity_spacings_per_s,
                    traversal_time_s=est.traversal_time_s)
            else:
                rate = phys.JS2_kelvin * phys.kB_over_hbar / phys.S_over_hbar
                physical = sc.PhysicalOut(velocity_spacings_per_s=s.v * rate)
        return sc.ScalesResponse(beta=beta, h=req.h, lam=s.lam, tau=s.tau,
                                 epsilon=s.epsilon, v=s.v,
                                 validity_ratio=s.validity_ratio,
                                 continuum_warning=s.continuum_warning,
                                 physical=physical)

    @app.post("/inject", response_model=sc.InjectResponse)
    def inject(req: sc.InjectRequest):
        res = run_experiment(req.config, base_dir=req.base_dir)
        rows = [sc.SummaryRow(**{k: v for k, v in r.items()}) for r in res["rows"]]
        return sc.InjectResponse(output_dir=res["output_dir"], digest=res["digest"],
                                 manifest=res["manifest"], rows=rows)

    @app.post("/thermalize", response_model=sc.ThermalizeResponse)
    def thermalize(req: sc.ThermalizeRequest):
        params = ChainParams(N=req.chain.N, h=req.chain.h)
        configs = [sample_thermal(params, ThermalSpec(req.thermal.T_red,
                                                      req.thermal.seed + i,
                                                      req.thermal.sweeps))
                   for i in range(req.n_samples)]
        diag = thermal_diagnostics(configs, params)
        files = []
        if req.out:
            out = Path(req.out)
            out.mkdir(parents=True, exist_ok=True)
            spath = out / "samples.npz"
            np.savez_compressed(spath,
                                spins=np.stack([c.spins for c in configs]),
                                seeds=np.arange(req.thermal.seed,
                                                req.thermal.seed + req.n_samples))
            diag.write_csv(out / "diagnostics.csv")
            files = [str(spath), str(out / "diagnostics.csv")]

        def conv(est):
            se = est.stderr if math.isfinite(est.stderr) else None
            return sc.CorrelatorOut(value=est.value, stderr=se)

        return sc.ThermalizeResponse(onsite_x=conv(diag.onsite_x),
                                     onsite_y=conv(diag.onsite_y),
                                     nn_diff_x=conv(diag.nn_diff_x),
                                     nn_diff_y=conv(diag.nn_diff_y), files=files)

    @app.post("/qubit", response_model=sc.QubitResponse)
    def qubit(req: sc.QubitRequest):
        q = req.qubit
        qp = QubitParams(delta=q.delta, mu=q.mu, alpha=q.alpha, qubit_site=q.site)
        files: list[str] = []
        if req.source == "analytic":
            beta = req.beta if req.beta is not None else math.atan(req.tan_beta)
            spec = SolitonSpec(beta=beta)
            field = AnalyticSolitonField(spec, req.h)
            span = field.default_span(req.window_xi)
            bt = evolve_qubit(field, qp, tau_span=span, dtau=q.dtau,
                              profile=CouplingProfile.gaussian(q.alpha))
            w0 = span[1] * 0.75
            asym = extract_asymptotics(bt, qp, window=(w0, span[1]))
            back = backaction_ratio(qp, beta, req.h, q.S_over_hbar)
        else:
            traj = load_trajectory(req.trajectory_path)
            track = track_core(traj, threshold=req.track_threshold)
            bt, asym, _ = replay_qubit(traj, q, track)
            back = None
            if traj.drive.kind != "none" and traj.drive.spec is not None:
                back = backaction_ratio(qp, traj.drive.spec.beta, traj.drive.h,
                                        q.S_over_hbar)
        if req.out:
            out = Path(req.out)
            out.mkdir(parents=True, exist_ok=True)
            bt.write_csv(out / "qubit.csv")
            write_asymptotics(asym, out / "asymptotics.txt")
            files = [str(out / "qubit.csv"), str(out / "asymptotics.txt")]
        nd = float(np.abs(np.linalg.norm(bt.a, axis=1) - 1.0).max())
        return sc.QubitResponse(az_out=asym.az_out, aperp_out=asym.aperp_out,
                                omega=asym.omega, phi=asym.phi, backaction=back,
                                norm_deviation=nd, files=files)

    @app.post("/sweep", response_model=sc.SweepResponse)
    def sweep(req: sc.SweepRequest):
        res = sweep_grid(req.base, req.axes, out_dir=req.out, workers=req.workers,
                         max_cells=req.max_cells)
        return sc.SweepResponse(cells=res["cells"], csv=res["csv"], rows=res["rows"])

    @app.post("/export", response_model=sc.ExportResponse)
    def export(req: sc.ExportRequest):
        files = export_figure_data(req.bundle_dir, req.kind, seed=req.seed,
                                   heatmap=req.heatmap)
        return sc.ExportResponse(files=files)

    return app


app = create_app()
