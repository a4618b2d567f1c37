"""Scenario documents: TOML parsing, validation, serialisation and sweep expansion.

A scenario is one TOML document. Top-level keys ``mode`` and ``seed`` plus the
sections [particle], [field], [self_force], [integrator], [initial], [output],
[run] and one mode section ([sweep], [ensemble], [liouville] or [fluid]).
Every problem is reported with its dotted path; parsing never stops at the first.
"""
import hashlib
import math
import os
import re
from dataclasses import asdict, dataclass, field, replace

import tomli
import tomli_w

from .errors import ParseError, ValidationError
from .fields import _KINDS as FIELD_KINDS, field_from_dict
from .selfforce import ParticleParams, SelfForceModel

MODES = ("single", "sweep", "ensemble", "liouville", "fluid-check")
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class IntegratorSpec:
    h: float
    span: float
    constraint: str = "projection"
    tol_root: float = 1e-12


@dataclass(frozen=True)
class InitialSpec:
    r: tuple = (0.0, 0.0, 0.0, 0.0)
    v: tuple = (0.0, 0.0, 0.0)
    prehistory_v: tuple = None


@dataclass(frozen=True)
class SweepSpec:
    sigma0: float = 0.04
    levels: int = 4
    radius: float = 1.0
    omega: float = 0.5
    s_eval: tuple = (0.0,)
    samples_per_sigma: int = 8
    models: tuple = ("retarded_hamiltonian", "present_time")


@dataclass(frozen=True)
class EnsembleSpec:
    count: int = 10000
    T: float = 0.5
    mu: float = 0.0
    drift: tuple = (0.0, 0.0, 0.0)
    hbar_scale: float = 1.0
    box_lo: tuple = (0.0, 0.0, 0.0)
    box_hi: tuple = (1.0, 1.0, 1.0)
    bins: tuple = (4, 1, 1)
    times: tuple = (0.0, 0.1)


@dataclass(frozen=True)
class LiouvilleSpec:
    delta: float = 1e-5
    checkpoints: int = 4


@dataclass(frozen=True)
class FluidSpec:
    kind: str = "isothermal"
    points: int = 100
    T: float = 0.5
    n0: float = 1.0
    drift: tuple = (0.0, 0.0, 0.0)
    grad: tuple = (0.0, 0.1, 0.0, 0.0)
    k: float = 1.0
    omega: float = 0.5


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    trace: bool = False
    figures: bool = True


@dataclass(frozen=True)
class RunSpec:
    workers: int = 0
    deterministic_reduce: bool = False


@dataclass(frozen=True)
class Scenario:
    mode: str
    seed: int
    particle: ParticleParams
    field: object
    model: SelfForceModel
    renormalize_mass: bool
    integrator: IntegratorSpec
    initial: InitialSpec
    output: OutputSpec = field(default_factory=OutputSpec)
    run: RunSpec = field(default_factory=RunSpec)
    sweep: SweepSpec = None
    ensemble: EnsembleSpec = None
    liouville: LiouvilleSpec = None
    fluid: FluidSpec = None

    def to_dict(self):
        d = {
            "schema": SCHEMA_VERSION,
            "mode": self.mode,
            "particle": {"q": self.particle.q, "m0": self.particle.m0, "sigma": self.particle.sigma},
            "field": self.field.to_dict(),
            "self_force": {"model": self.model.value, "renormalize_mass": self.renormalize_mass},
            "integrator": asdict(self.integrator),
            "initial": {k: list(v) for k, v in asdict(self.initial).items() if v is not None},
            "output": asdict(self.output),
            "run": asdict(self.run),
        }
        if self.seed is not None:
            d["seed"] = self.seed
        for name in ("sweep", "ensemble", "liouville", "fluid"):
            spec = getattr(self, name)
            if spec is not None:
                d[name] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()}
        return d

    def config_hash(self):
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def serialize(scenario):
    """Canonical TOML text; parse_scenario(serialize(s)) == s."""
    return tomli_w.dumps(scenario.to_dict())


# -- validation helpers --------------------------------------------------------

class _Checker:
    def __init__(self, doc):
        self.doc = doc
        self.errors = []

    def section(self, name, required=False):
        sec = self.doc.get(name)
        if sec is None:
            if required:
                self.errors.append((name, "section is required"))
            return None
        if not isinstance(sec, dict):
            self.errors.append((name, "must be a table"))
            return None
        return sec

    def unknown(self, sec, path, allowed):
        for k in sec:
            if k not in allowed:
                self.errors.append((f"{path}.{k}", "unknown key"))

    def num(self, sec, path, key, default=None, positive=False, nonneg=False, integer=False):
        p = f"{path}.{key}"
        if key not in sec:
            if default is None:
                self.errors.append((p, "is required"))
            return default
        v = sec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.errors.append((p, "must be a number"))
            return default
        if integer and not isinstance(v, int):
            self.errors.append((p, "must be an integer"))
            return default
        if not math.isfinite(v):
            self.errors.append((p, "must be finite"))
            return default
        if positive and not v > 0:
            self.errors.append((p, f"{key} must be > 0"))
        if nonneg and v < 0:
            self.errors.append((p, f"{key} must be >= 0"))
        return v if integer else float(v)

    def vec(self, sec, path, key, length, default=None, integer=False):
        p = f"{path}.{key}"
        if key not in sec:
            return default
        v = sec[key]
        if not isinstance(v, list) or (length is not None and len(v) != length):
            self.errors.append((p, f"must be a list of {length} numbers" if length else "must be a list"))
            return default
        bad = [x for x in v if isinstance(x, bool) or not isinstance(x, (int, float))
               or (isinstance(x, float) and not math.isfinite(x))]
        if bad:
            self.errors.append((p, "entries must be finite numbers"))
            return default
        if integer:
            if any(not isinstance(x, int) for x in v):
                self.errors.append((p, "entries must be integers"))
                return default
            return tuple(v)
        return tuple(float(x) for x in v)

    def flag(self, sec, path, key, default):
        if key not in sec:
            return default
        if not isinstance(sec[key], bool):
            self.errors.append((f"{path}.{key}", "must be true or false"))
            return default
        return sec[key]

    def text(self, sec, path, key, default, choices=None):
        if key not in sec:
            return default
        v = sec[key]
        if not isinstance(v, str):
            self.errors.append((f"{path}.{key}", "must be a string"))
            return default
        if choices is not None and v not in choices:
            self.errors.append((f"{path}.{key}", f"must be one of {list(choices)}"))
            return default
        return v


def _loads(text):
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        msg = getattr(exc, "msg", str(exc))
        if line is None:
            m = re.search(r"line (\d+), column (\d+)", str(exc))
            if m:
                line, col = int(m.group(1)), int(m.group(2))
            msg = re.sub(r"\s*\(at line \d+, column \d+\)", "", str(exc))
        raise ParseError(msg, line, col) from None


def parse_scenario(text):
    """Parse and validate a TOML scenario; raises ParseError or ValidationError."""
    doc = _loads(text)
    c = _Checker(doc)
    top = {"schema", "mode", "seed", "particle", "field", "self_force", "integrator", "initial", "output", "run",
           "sweep", "ensemble", "liouville", "fluid"}
    c.unknown(doc, "", top)
    c.errors = [(p.lstrip("."), m) for p, m in c.errors]
    if "schema" in doc and doc["schema"] != SCHEMA_VERSION:
        c.errors.append(("schema", f"unsupported schema version {doc['schema']!r}"))
    mode = c.text(doc, "", "mode", "single", MODES)
    c.errors = [(p.lstrip("."), m) for p, m in c.errors]
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64):
        c.errors.append(("seed", "must be an integer in [0, 2^64)"))
        seed = None
    if mode in ("ensemble",) and seed is None and "seed" not in doc:
        c.errors.append(("seed", "seed is mandatory in ensemble mode"))

    # particle
    sec = c.section("particle") or {}
    c.unknown(sec, "particle", {"q", "m0", "sigma"})
    q = c.num(sec, "particle", "q", 1.0)
    m0 = c.num(sec, "particle", "m0", 1.0, positive=True)
    sigma = c.num(sec, "particle", "sigma", None, positive=True)

    # field
    sec = c.section("field") or {"kind": "zero"}
    fmodel = None
    kind = sec.get("kind", "zero")
    if kind not in FIELD_KINDS:
        c.errors.append(("field.kind", f"must be one of {sorted(FIELD_KINDS)}"))
    else:
        try:
            fmodel = field_from_dict(sec)
        except (TypeError, ValueError) as exc:
            c.errors.append(("field", str(exc)))

    # self-force
    sec = c.section("self_force") or {}
    c.unknown(sec, "self_force", {"model", "renormalize_mass"})
    model = c.text(sec, "self_force", "model", "none", [m.value for m in SelfForceModel])
    renorm = c.flag(sec, "self_force", "renormalize_mass", False)

    # integrator
    sec = c.section("integrator") or {}
    c.unknown(sec, "integrator", {"h", "span", "constraint", "tol_root"})
    h = c.num(sec, "integrator", "h", sigma / 4.0 if isinstance(sigma, float) and sigma > 0 else 0.0, positive=True)
    span = c.num(sec, "integrator", "span", 0.0, nonneg=True)
    constraint = c.text(sec, "integrator", "constraint", "projection", ("projection", "none"))
    tol_root = c.num(sec, "integrator", "tol_root", 1e-12, positive=True)
    if isinstance(h, float) and isinstance(sigma, float) and sigma > 0 and h > sigma / 4.0 * (1 + 1e-12):
        c.errors.append(("integrator.h", "h must be <= sigma/4"))

    # initial state
    sec = c.section("initial") or {}
    c.unknown(sec, "initial", {"r", "v", "prehistory_v"})
    r0 = c.vec(sec, "initial", "r", 4, (0.0, 0.0, 0.0, 0.0))
    v0 = c.vec(sec, "initial", "v", 3, (0.0, 0.0, 0.0))
    pre = c.vec(sec, "initial", "prehistory_v", 3, None)
    for key, v in (("v", v0), ("prehistory_v", pre)):
        if v is not None and sum(x * x for x in v) >= 1.0:
            c.errors.append((f"initial.{key}", "speed must be < 1"))

    # output and run
    sec = c.section("output") or {}
    c.unknown(sec, "output", {"dir", "trace", "figures"})
    output = OutputSpec(c.text(sec, "output", "dir", "out"), c.flag(sec, "output", "trace", False),
                        c.flag(sec, "output", "figures", True))
    sec = c.section("run") or {}
    c.unknown(sec, "run", {"workers", "deterministic_reduce"})
    run = RunSpec(c.num(sec, "run", "workers", 0, nonneg=True, integer=True),
                  c.flag(sec, "run", "deterministic_reduce", False))

    sweep = ensemble = liou = fluid = None
    if mode == "sweep":
        sec = c.section("sweep", required=True) or {}
        c.unknown(sec, "sweep", {"sigma0", "levels", "radius", "omega", "s_eval", "samples_per_sigma", "models"})
        models = sec.get("models", list(SweepSpec.models))
        if not isinstance(models, list) or any(m not in ("retarded_hamiltonian", "present_time") for m in models):
            c.errors.append(("sweep.models", "entries must be 'retarded_hamiltonian' or 'present_time'"))
            models = list(SweepSpec.models)
        sweep = SweepSpec(
            c.num(sec, "sweep", "sigma0", 0.04, positive=True),
            c.num(sec, "sweep", "levels", 4, positive=True, integer=True),
            c.num(sec, "sweep", "radius", 1.0, positive=True),
            c.num(sec, "sweep", "omega", 0.5, positive=True),
            c.vec(sec, "sweep", "s_eval", None, (0.0,)),
            c.num(sec, "sweep", "samples_per_sigma", 8, positive=True, integer=True),
            tuple(models),
        )
        if isinstance(sweep.levels, int) and sweep.levels < 2:
            c.errors.append(("sweep.levels", "need at least 2 levels to fit a slope"))
    elif mode == "ensemble":
        sec = c.section("ensemble", required=True) or {}
        c.unknown(sec, "ensemble", set(EnsembleSpec.__dataclass_fields__))
        ensemble = EnsembleSpec(
            c.num(sec, "ensemble", "count", 10000, positive=True, integer=True),
            c.num(sec, "ensemble", "T", 0.5, positive=True),
            c.num(sec, "ensemble", "mu", 0.0),
            c.vec(sec, "ensemble", "drift", 3, (0.0, 0.0, 0.0)),
            c.num(sec, "ensemble", "hbar_scale", 1.0, positive=True),
            c.vec(sec, "ensemble", "box_lo", 3, (0.0, 0.0, 0.0)),
            c.vec(sec, "ensemble", "box_hi", 3, (1.0, 1.0, 1.0)),
            c.vec(sec, "ensemble", "bins", 3, (4, 1, 1), integer=True),
            c.vec(sec, "ensemble", "times", None, (0.0, 0.1)),
        )
        if any(hi <= lo for lo, hi in zip(ensemble.box_lo, ensemble.box_hi)):
            c.errors.append(("ensemble.box_hi", "must exceed box_lo on every axis"))
        if any(b < 1 for b in ensemble.bins):
            c.errors.append(("ensemble.bins", "entries must be >= 1"))
        t = ensemble.times
        if len(t) < 2 or any(b <= a for a, b in zip(t, t[1:])) or t[0] < 0:
            c.errors.append(("ensemble.times", "need >= 2 increasing non-negative times"))
        if sum(x * x for x in ensemble.drift) >= 1.0:
            c.errors.append(("ensemble.drift", "speed must be < 1"))
    elif mode == "liouville":
        sec = c.section("liouville") or {}
        c.unknown(sec, "liouville", {"delta", "checkpoints"})
        liou = LiouvilleSpec(c.num(sec, "liouville", "delta", 1e-5, positive=True),
                             c.num(sec, "liouville", "checkpoints", 4, positive=True, integer=True))
    elif mode == "fluid-check":
        sec = c.section("fluid") or {}
        c.unknown(sec, "fluid", set(FluidSpec.__dataclass_fields__))
        fluid = FluidSpec(
            c.text(sec, "fluid", "kind", "isothermal", ("uniform", "shear", "rotation", "isothermal")),
            c.num(sec, "fluid", "points", 100, positive=True, integer=True),
            c.num(sec, "fluid", "T", 0.5, positive=True),
            c.num(sec, "fluid", "n0", 1.0, positive=True),
            c.vec(sec, "fluid", "drift", 3, (0.0, 0.0, 0.0)),
            c.vec(sec, "fluid", "grad", 4, (0.0, 0.1, 0.0, 0.0)),
            c.num(sec, "fluid", "k", 1.0),
            c.num(sec, "fluid", "omega", 0.5),
        )
        if sum(x * x for x in fluid.drift) >= 1.0:
            c.errors.append(("fluid.drift", "speed must be < 1"))
        if mode == "fluid-check" and seed is None:
            c.errors.append(("seed", "seed is mandatory in fluid-check mode (random evaluation points)"))

    particle = None
    if not c.errors:
        try:
            particle = ParticleParams(q, m0, sigma)
        except ValueError as exc:
            c.errors.append(("particle", str(exc)))
    if c.errors:
        raise ValidationError(c.errors)
    return Scenario(mode, seed, particle, fmodel, SelfForceModel(model), renorm,
                    IntegratorSpec(h, span, constraint, tol_root), InitialSpec(r0, v0, pre),
                    output, run, sweep, ensemble, liou, fluid)


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def expand_sweep(scenario):
    """Derived single-sigma scenarios sigma0 * 2^-k, k = 0 .. levels-1, with h = sigma/4."""
    if scenario.sweep is None:
        raise ValueError("scenario has no [sweep] section")
    out = []
    for k in range(scenario.sweep.levels):
        sig = scenario.sweep.sigma0 * 2.0 ** (-k)
        p = ParticleParams(scenario.particle.q, scenario.particle.m0, sig)
        integ = replace(scenario.integrator, h=min(scenario.integrator.h, sig / 4.0))
        out.append(replace(scenario, particle=p, integrator=integ))
    return out


def default_workers(run):
    return run.workers if run.workers > 0 else (os.cpu_count() or 1)
