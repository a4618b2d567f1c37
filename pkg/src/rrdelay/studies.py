"""Sigma-halving convergence studies of the short-delay models."""
from dataclasses import dataclass

import numpy as np

from . import fluid as fl
from . import selfforce as sf
from .history import WorldlineHistory
from .selfforce import ParticleParams


def fit_slope(sigmas, errors):
    """Least-squares slope of log(error) against log(sigma)."""
    return float(np.polyfit(np.log(sigmas), np.log(errors), 1)[0])


@dataclass
class SweepResult:
    sigmas: np.ndarray
    errors: dict          # model name -> relative errors, one per sigma
    slopes: dict

    def rows(self):
        for model, errs in self.errors.items():
            for sig, e in zip(self.sigmas, errs):
                yield model, float(sig), float(e)


def _asymptotic(model, hist, s, p):
    if model == "retarded_hamiltonian":
        return sf.self_force_retarded_hamiltonian(hist, s, p)
    if model == "present_time":
        return sf.self_force_present_time(hist, s, p)
    raise ValueError(f"not an asymptotic model: {model!r}")


def sigma_sweep(worldline, sigmas, q=1.0, m0=1.0, s_eval=(0.0,), samples_per_sigma=8,
                models=("retarded_hamiltonian", "present_time")):
    """Max relative error |G_exact - G_model| / |G_exact| over ``s_eval`` for each sigma.

    The world-line is sampled on a grid of spacing sigma / samples_per_sigma
    reaching 12 sigma into the past and 2 sigma beyond the evaluation points.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    errors = {m: [] for m in models}
    for sig in sigmas:
        p = ParticleParams(q, m0, sig)
        h = sig / samples_per_sigma
        lo = min(s_eval) - 12.0 * sig
        n = int(np.ceil((max(s_eval) + 2.0 * sig - lo) / h))
        grid = lo + h * np.arange(n + 1)
        hist = WorldlineHistory.from_function(worldline, grid)
        worst = {m: 0.0 for m in models}
        for s in s_eval:
            exact = sf.self_force_exact(hist, s, p)
            for m in models:
                err = np.linalg.norm(exact - _asymptotic(m, hist, s, p)) / np.linalg.norm(exact)
                worst[m] = max(worst[m], err)
        for m in models:
            errors[m].append(worst[m])
    errors = {m: np.asarray(e) for m, e in errors.items()}
    return SweepResult(sigmas, errors, {m: fit_slope(sigmas, e) for m, e in errors.items()})


def fluid_sigma_sweep(callbacks, r, sigmas, q=1.0, m0=1.0):
    """Relative gap between retarded- and present-time fluid forces at ``r`` per sigma."""
    sigmas = np.asarray(sigmas, dtype=float)
    errs = []
    for sig in sigmas:
        U, DU, D2U = fl.convective_derivatives(callbacks, r)
        present = fl.fluid_self_force_present(U, DU, D2U, sig, q, m0)
        _, retarded = fl.fluid_self_force_retarded(callbacks, r, sig, q, m0)
        errs.append(np.linalg.norm(present - retarded) / np.linalg.norm(present))
    errs = np.asarray(errs)
    return SweepResult(sigmas, {"fluid_retarded_vs_present": errs},
                       {"fluid_retarded_vs_present": fit_slope(sigmas, errs)})
