"""Command-line front end: ``rrdelay run <config>`` and ``rrdelay validate <config>``."""
import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from . import fluid as fl
from . import plotting
from .errors import IntegrationError, ParseError, RRError, ValidationError
from .geometry import minkowski_dot, velocity_from_three
from .integrator import (IntegratorConfig, integrated_divergence, liouville_series, run_scenario,
                         velocity_volume_series)
from .kinetic import (MaxwellianParams, compute_moments, evolve_snapshots, maxwellian_closed_form,
                      moment_residuals, sample_maxwellian)
from .scenario import default_workers, expand_sweep, load_scenario, serialize
from .selfforce import SelfForceModel, self_force_ll_iterative
from .studies import fluid_sigma_sweep, sigma_sweep
from .worldlines import Circular

ENGINE = "rrdelay"


def _fmt(x):
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return path


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def integrator_config(sc, **over):
    cfg = IntegratorConfig(h=sc.integrator.h, span=sc.integrator.span, model=sc.model, field=sc.field,
                           constraint=sc.integrator.constraint, renormalize_mass=sc.renormalize_mass,
                           tol_root=sc.integrator.tol_root)
    return replace(cfg, **over) if over else cfg


def initial_state(sc):
    u0 = velocity_from_three(sc.initial.v)
    pre = None if sc.initial.prehistory_v is None else velocity_from_three(sc.initial.prehistory_v)
    return np.asarray(sc.initial.r, dtype=float), u0, pre


# -- mode handlers -------------------------------------------------------------

def run_single(sc, out, trace=False):
    r0, u0, pre = initial_state(sc)
    cfg = integrator_config(sc)
    trace_rows = []

    def observer(state, forces):
        f_ext, f_self = forces
        trace_rows.append([state.s, *state.r, *state.u, np.linalg.norm(f_ext), np.linalg.norm(f_self),
                           minkowski_dot(state.u, state.u) - 1.0])

    res = run_scenario(r0, u0, cfg, sc.particle, prehistory_velocity=pre, observer=observer if trace else None)
    h = res.history
    files = [_write_csv(os.path.join(out, "trajectory.csv"),
                        ["s", "r0", "r1", "r2", "r3", "u0", "u1", "u2", "u3", "a0", "a1", "a2", "a3"],
                        ([h.s[i], *h.r[i], *h.u[i], *h.a[i]] for i in range(len(h))))]
    d = res.diagnostics.arrays()
    files.append(_write_csv(os.path.join(out, "diagnostics.csv"),
                            ["s", "uu_minus_1", "force_ext", "force_self", "self_power"],
                            zip(d["s"], d["uu_drift"], d["ext_force"], d["self_force"], d["self_power"])))
    if trace:
        files.append(_write_csv(os.path.join(out, "trace.csv"),
                                ["s", "r0", "r1", "r2", "r3", "u0", "u1", "u2", "u3", "force_ext", "force_self",
                                 "uu_minus_1"], trace_rows))
    summary = {
        "steps": len(h) - 1,
        "final": {"s": h.s[-1], "r": h.r[-1], "u": h.u[-1]},
        "energy_change": h.u[-1][0] - h.u[0][0],
        "self_work": res.diagnostics.self_work(),
        "max_abs_uu_minus_1": float(np.max(np.abs(d["uu_drift"]))),
        "max_self_force": float(np.max(d["self_force"])),
    }
    files.append(_write_json(os.path.join(out, "summary.json"), _jsonable(summary)))
    if sc.output.figures:
        files.append(plotting.trajectory_figure(h, res.diagnostics, os.path.join(out, "trajectory.png")))
    return files


def run_sweep(sc, out):
    sw = sc.sweep
    derived = expand_sweep(sc)
    sigmas = [d.particle.sigma for d in derived]
    res = sigma_sweep(Circular(sw.radius, sw.omega), sigmas, sc.particle.q, sc.particle.m0, sw.s_eval,
                      sw.samples_per_sigma, sw.models)
    files = [_write_csv(os.path.join(out, "sweep.csv"), ["model", "sigma", "error"], res.rows())]
    files.append(_write_json(os.path.join(out, "sweep.json"),
                             _jsonable({"sigmas": res.sigmas, "errors": res.errors, "slopes": res.slopes})))
    if sc.output.figures:
        files.append(plotting.sweep_figure(res, os.path.join(out, "convergence.png")))
    return files


def _ensemble_one(args):
    r, u, cfg, params, times = args
    res = run_scenario(r, u, cfg, params)
    return [np.concatenate([s.r, s.u, s.a]) for s in (res.history.at_coordinate_time(t) for t in times)]


def run_ensemble(sc, out, workers=1):
    es = sc.ensemble
    U = velocity_from_three(es.drift)
    mp = MaxwellianParams(mu=es.mu, T=es.T, U=tuple(U), m=sc.particle.m0, q=sc.particle.q, hbar_scale=es.hbar_scale)
    box = (es.box_lo, es.box_hi)
    ens = sample_maxwellian(mp, es.count, sc.seed, box=box)
    files = []
    path = os.path.join(out, "ensemble.csv")
    ens.to_csv(path)
    files.append(path)
    mom = compute_moments(ens)
    cf = maxwellian_closed_form(mp)
    mom.decomposition = {"n0": cf.n0, "n1": cf.n1, "p0": cf.p0, "p1": cf.p1, "e": cf.e}
    doc = mom.to_dict()
    doc["sampler"] = {k: v for k, v in ens.meta.items() if k != "params"}
    doc["density_relative_error"] = mom.density / cf.n0 - 1.0
    doc["tolerance_3_over_sqrtN"] = 3.0 / np.sqrt(len(ens))
    files.append(_write_json(os.path.join(out, "moments.json"), _jsonable(doc)))

    cfg = integrator_config(sc)
    if cfg.model in (SelfForceModel.NONE, SelfForceModel.LL) or workers <= 1:
        snaps = evolve_snapshots(ens, cfg, sc.particle, es.times, box)
    else:
        # history models: one independent integration per particle, gathered in index order
        from .kinetic import KineticEnsemble, _wrap
        cfg = replace(cfg, span=float(max(es.times)) + 2.0 * cfg.h)
        jobs = [(ens.r[i], ens.u[i], cfg, sc.particle, es.times) for i in range(len(ens))]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            states = list(pool.map(_ensemble_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
        nu = ens.number_weights
        snaps = []
        for j, t in enumerate(es.times):
            arr = np.array([st[j] for st in states])
            rr, uu, aa = arr[:, :4], arr[:, 4:8], arr[:, 8:]
            snaps.append(KineticEnsemble(_wrap(rr, box), uu, nu / uu[:, 0], {"t": float(t)}, aa))
    res = moment_residuals(snaps, box, es.bins)
    files.append(_write_json(os.path.join(out, "residuals.json"), _jsonable(res.to_dict())))
    if sc.output.figures:
        files.append(plotting.residual_figure(res, os.path.join(out, "residuals.png")))
    return files


def run_liouville(sc, out):
    r0, u0, _ = initial_state(sc)
    cfg = integrator_config(sc)
    n = sc.liouville.checkpoints
    checkpoints = [cfg.n_steps * cfg.h * (k + 1) / n for k in range(n)]
    files = []
    report = {"model": cfg.model.value, "delta": sc.liouville.delta}
    if cfg.model is SelfForceModel.LL:
        s, det, base = velocity_volume_series(r0, u0, cfg, sc.particle, sc.liouville.delta, checkpoints)
        s_div, div, cum = integrated_divergence(base)
        report["coordinates"] = "velocity (r, u^i)"
        report["divergence_integral"] = np.interp(s, s_div, cum)
        files.append(_write_csv(os.path.join(out, "divergence.csv"), ["s", "divergence", "integral"],
                                zip(s_div, div, cum)))
    else:
        s, det = liouville_series(r0, u0, cfg, sc.particle, sc.liouville.delta, checkpoints)
        s_div = cum = None
        report["coordinates"] = "canonical (r, P)"
    report["s"] = s
    report["determinant"] = det
    report["ln_determinant"] = np.log(np.abs(det))
    files.append(_write_csv(os.path.join(out, "liouville.csv"), ["s", "determinant"], zip(s, det)))
    files.append(_write_json(os.path.join(out, "liouville.json"), _jsonable(report)))
    if sc.output.figures:
        files.append(plotting.liouville_figure(s, det, os.path.join(out, "liouville.png"), s_div, cum))
    return files


def _fluid_callbacks(fs):
    U = tuple(velocity_from_three(fs.drift))
    if fs.kind == "uniform":
        return fl.UniformFluid(U, fs.n0, fs.n0 * fs.T)
    if fs.kind == "shear":
        return fl.ShearFlow(fs.k, fs.n0)
    if fs.kind == "rotation":
        return fl.RigidRotation(fs.omega, fs.n0)
    return fl.IsothermalMaxwellian(U, fs.T, fs.n0, fs.grad)


def run_fluid_check(sc, out):
    fs = sc.fluid
    cb = _fluid_callbacks(fs)
    p = sc.particle
    rng = np.random.default_rng(sc.seed)
    pts = rng.uniform(-0.5, 0.5, size=(fs.points, 4))
    rows = []
    worst_particle = 0.0
    worst_oracle = 0.0
    worst_h2 = 0.0
    worst_pressure = 0.0
    for r in pts:
        K, info = fl.fluid_ll_force(cb, sc.field, r, p, breakdown=True)
        # with the pressure switched off the fluid force must reduce to the
        # single-particle LL force along the local fluid velocity
        cold = fl.UniformFluid(cb.U(r), cb.n(r))
        K0, cold_info = fl.fluid_ll_force(cold, sc.field, r, p, breakdown=True)
        Kp = self_force_ll_iterative(sc.field, r, cb.U(r), p) / p.m0
        worst_h2 = max(worst_h2, float(np.max(np.abs(cold_info["h2"]))))
        worst_pressure = max(worst_pressure, float(np.max(np.abs(K - K0))))
        D2U, _ = fl.ll_iterated_acceleration(cb, sc.field, r, p)
        oracle = fl.flux_derivative_oracle(cb, sc.field, r, p)
        worst_particle = max(worst_particle, float(np.max(np.abs(K0 - Kp))))
        worst_oracle = max(worst_oracle, float(np.max(np.abs(D2U - oracle))))
        rows.append([*r, *K, *info["h2"]])
    files = [_write_csv(os.path.join(out, "fluid_points.csv"),
                        ["r0", "r1", "r2", "r3", "K0", "K1", "K2", "K3", "h2_0", "h2_1", "h2_2", "h2_3"], rows)]
    sweep = fluid_sigma_sweep(fl.RigidRotation(fs.omega, fs.n0), np.array([0.0, 1.0, 0.0, 0.0]),
                              p.sigma * 2.0 ** -np.arange(4), p.q, p.m0)
    report = {
        "kind": fs.kind,
        "points": fs.points,
        "max_abs_fluid_minus_particle_zero_pressure": worst_particle,
        "max_abs_h2_zero_pressure": worst_h2,
        "max_abs_pressure_contribution": worst_pressure,
        "max_abs_iterated_minus_fd_oracle": worst_oracle,
        "retarded_vs_present_sweep": {"sigmas": sweep.sigmas, "errors": sweep.errors["fluid_retarded_vs_present"],
                                      "slope": sweep.slopes["fluid_retarded_vs_present"]},
    }
    files.append(_write_json(os.path.join(out, "fluid_check.json"), _jsonable(report)))
    path = os.path.join(out, "fluid_breakdown.json")
    with open(path, "w") as fh:
        fh.write(fl.breakdown_json(cb, sc.field, pts[0], p) + "\n")
    files.append(path)
    return files


# -- driver ----------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def execute(sc, out=None, trace=None, workers=None):
    """Run a validated scenario, writing every artifact plus manifest.json into ``out``."""
    out = out or sc.output.dir
    os.makedirs(out, exist_ok=True)
    trace = sc.output.trace if trace is None else trace
    if workers is None:
        workers = 1 if sc.run.deterministic_reduce else default_workers(sc.run)
    with open(os.path.join(out, "scenario.toml"), "w") as fh:
        fh.write(serialize(sc))
    if sc.mode == "single":
        files = run_single(sc, out, trace)
    elif sc.mode == "sweep":
        files = run_sweep(sc, out)
    elif sc.mode == "ensemble":
        files = run_ensemble(sc, out, workers)
    elif sc.mode == "liouville":
        files = run_liouville(sc, out)
    else:
        files = run_fluid_check(sc, out)
    files = [os.path.join(out, "scenario.toml")] + files
    manifest = {
        "engine": ENGINE,
        "version": __version__,
        "mode": sc.mode,
        "seed": sc.seed,
        "config_hash": sc.config_hash(),
        "files": {os.path.basename(f): _sha256(f) for f in files},
    }
    _write_json(os.path.join(out, "manifest.json"), manifest)
    return manifest


def _error_doc(exc):
    doc = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ValidationError):
        doc["errors"] = [{"path": p, "message": m} for p, m in exc.errors]
    if isinstance(exc, ParseError):
        doc["line"], doc["column"] = exc.line, exc.column
    if isinstance(exc, IntegrationError):
        doc["s"] = exc.s
        doc["cause"] = type(exc.cause).__name__
    return doc


def build_parser():
    ap = argparse.ArgumentParser(prog="rrdelay", description="Finite-size radiation-reaction engine")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run a scenario"), ("validate", "check a scenario without running it")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="scenario TOML file")
        sp.add_argument("--out", help="output directory (overrides [output].dir)")
        sp.add_argument("--seed", type=int, help="RNG seed (overrides the document)")
        sp.add_argument("--trace", action="store_true", help="write per-step trace.csv")
        sp.add_argument("--deterministic-reduce", action="store_true",
                        help="serial execution with fixed-shape reductions")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ValidationError([("seed", "must be an integer in [0, 2^64)")])
            sc = replace(sc, seed=args.seed)
        if args.deterministic_reduce:
            sc = replace(sc, run=replace(sc.run, deterministic_reduce=True))
        if args.command == "validate":
            print(json.dumps({"valid": True, "mode": sc.mode, "config_hash": sc.config_hash()}, sort_keys=True))
            return 0
        manifest = execute(sc, out=args.out, trace=args.trace or None)
        print(json.dumps({"ok": True, "out": args.out or sc.output.dir, "files": sorted(manifest["files"])},
                         sort_keys=True))
        return 0
    except (RRError, OSError, ValueError) as exc:
        print(json.dumps(_jsonable(_error_doc(exc)), sort_keys=True), file=sys.stdout)
        return 2 if isinstance(exc, (ParseError, ValidationError)) else 1


if __name__ == "__main__":
    sys.exit(main())
