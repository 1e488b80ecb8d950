"""Scenario files (TOML) -> manifold spec, plant, simulation and verification settings."""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .control import PlantSpec
from .errors import ConfigurationError, ExpressionSyntaxError, ManifoldControlError
from .expr import parse
from .manifold import ManifoldSpec
from .sim import Degenerate, Exponential, JumpMeasureConfig, SimConfig, Uniform
from .synthesis import DEFAULT_ODE_TOL

BUILTIN = {"paper-example": "paper-example.toml", "deterministic": "deterministic.toml"}


class ConfigFieldError(ConfigurationError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class VerifyConfig:
    samples: int
    seed: int
    t_box: tuple[float, float]
    x_box: tuple[tuple[float, float], ...]
    gamma_grid: tuple[float, ...]


@dataclass(frozen=True)
class Perturbation:
    drift: tuple[float, ...] | None = None
    diffusion: tuple[tuple[float, ...], ...] | None = None
    jump: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    spec: ManifoldSpec
    plant: PlantSpec
    t0: float
    x0: tuple[float, ...]
    sim: SimConfig
    ode_tol: float
    verify: VerifyConfig
    perturb: Perturbation | None = None

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, sim=replace(self.sim, seed=seed), verify=replace(self.verify, seed=seed))


def _get(table: dict, section: str, key: str, default: Any = ..., kind=None):
    if key not in table:
        if default is ...:
            raise ConfigFieldError(f"{section}.{key}", "missing required field")
        return default
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigFieldError(f"{section}.{key}", f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _floats(value, field: str, length: int | None = None) -> tuple[float, ...]:
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigFieldError(field, "expected a list of numbers")
    if length is not None and len(value) != length:
        raise ConfigFieldError(field, f"expected {length} entries, got {len(value)}")
    return tuple(float(v) for v in value)


def _exprs(value, field: str, n: int):
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigFieldError(field, "expected a list of expression strings")
    out = []
    for i, src in enumerate(value):
        try:
            out.append(parse(src, n))
        except ExpressionSyntaxError as exc:
            raise ConfigFieldError(f"{field}[{i}]", f"{exc} in {src!r}") from None
    return tuple(out)


def _mark(spec, field: str):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigFieldError(field, "expected a table with a 'kind' key")
    kind = spec["kind"]
    try:
        if kind == "uniform":
            return Uniform(float(spec["low"]), float(spec["high"]))
        if kind == "exponential":
            return Exponential(float(spec["rate"]))
        if kind == "degenerate":
            return Degenerate(float(spec["value"]))
    except KeyError as exc:
        raise ConfigFieldError(field, f"missing {exc.args[0]!r} for {kind} marks") from None
    except ValueError as exc:
        raise ConfigFieldError(field, str(exc)) from None
    raise ConfigFieldError(f"{field}.kind", f"unknown mark distribution {kind!r}")


def scenario_from_dict(data: dict, name: str = "<config>") -> Scenario:
    system = data.get("system", {})
    n = _get(system, "system", "n", kind=int)
    if n < 2:
        raise ConfigFieldError("system.n", f"state dimension must be >= 2, got {n}")
    m = _get(system, "system", "m", 1, kind=int)
    if m < 0:
        raise ConfigFieldError("system.m", "must be >= 0")
    t0 = _get(system, "system", "t0", 0.0, kind=float)
    x0 = _floats(_get(system, "system", "x0"), "system.x0", n)

    man = data.get("manifold", {})
    u_src = _get(man, "manifold", "u", kind=str)
    try:
        u = parse(u_src, n)
    except ExpressionSyntaxError as exc:
        raise ConfigFieldError("manifold.u", f"{exc} in {u_src!r}") from None
    f = _exprs(_get(man, "manifold", "f", [], kind=list), "manifold.f", n)
    phi = _exprs(_get(man, "manifold", "phi", [], kind=list), "manifold.phi", n)
    q00 = _exprs(_get(man, "manifold", "q00", ["1"] * m, kind=list), "manifold.q00", n)
    h = _exprs(_get(man, "manifold", "h", [], kind=list), "manifold.h", n)
    h_rows = None
    if "h_rows" in man:
        rows = _get(man, "manifold", "h_rows", kind=list)
        h_rows = tuple(_exprs(r, f"manifold.h_rows[{i}]", n) for i, r in enumerate(rows))
    try:
        spec = ManifoldSpec(n=n, m=m, u=u, f_funcs=f, h_funcs=h, phi_funcs=phi, q00=q00, h_rows=h_rows)
    except ManifoldControlError as exc:
        raise ConfigFieldError("manifold", str(exc)) from None

    plant_t = data.get("plant", {})
    P = _exprs(_get(plant_t, "plant", "P", kind=list), "plant.P", n)
    Q_rows = _get(plant_t, "plant", "Q", kind=list)
    Q = tuple(_exprs(r, f"plant.Q[{i}]", n) for i, r in enumerate(Q_rows))
    try:
        plant = PlantSpec(P, Q)
    except ManifoldControlError as exc:
        raise ConfigFieldError("plant", str(exc)) from None

    jt = data.get("jumps", {})
    try:
        jumps = JumpMeasureConfig(
            _get(jt, "jumps", "rate", 0.0, kind=float),
            _mark(jt["mark"], "jumps.mark") if "mark" in jt else Degenerate(0.0),
        )
    except ValueError as exc:
        raise ConfigFieldError("jumps", str(exc)) from None

    st = data.get("sim", {})
    try:
        sim = SimConfig(
            dt=_get(st, "sim", "dt", 1e-3, kind=float),
            T=_get(st, "sim", "T", 1.0, kind=float),
            paths=_get(st, "sim", "paths", 1, kind=int),
            seed=_get(st, "sim", "seed", 0, kind=int),
            record_stride=_get(st, "sim", "record_stride", 1, kind=int),
            jumps=jumps,
        )
    except ValueError as exc:
        raise ConfigFieldError("sim", str(exc)) from None
    ode_tol = _get(st, "sim", "ode_tol", DEFAULT_ODE_TOL, kind=float)
    if not ode_tol > 0:
        raise ConfigFieldError("sim.ode_tol", "must be > 0")

    vt = data.get("verify", {})
    x_box_raw = _get(vt, "verify", "x_box", [[v - 0.5, v + 0.5] for v in x0], kind=list)
    if len(x_box_raw) != n:
        raise ConfigFieldError("verify.x_box", f"expected {n} intervals, got {len(x_box_raw)}")
    verify = VerifyConfig(
        samples=_get(vt, "verify", "samples", 100, kind=int),
        seed=_get(vt, "verify", "seed", 0, kind=int),
        t_box=_floats(_get(vt, "verify", "t_box", [t0, t0]), "verify.t_box", 2),
        x_box=tuple(_floats(b, f"verify.x_box[{i}]", 2) for i, b in enumerate(x_box_raw)),
        gamma_grid=_floats(_get(vt, "verify", "gamma_grid", [0.0, 0.5, 1.0]), "verify.gamma_grid"),
    )

    perturb = None
    if "perturb" in data:
        pt = data["perturb"]
        diff = None
        if "diffusion" in pt:
            rows = pt["diffusion"]
            if not isinstance(rows, list) or len(rows) != n:
                raise ConfigFieldError("perturb.diffusion", f"expected {n} rows of {m} numbers")
            diff = tuple(_floats(r, f"perturb.diffusion[{i}]", m) for i, r in enumerate(rows))
        perturb = Perturbation(
            drift=_floats(pt["drift"], "perturb.drift", n) if "drift" in pt else None,
            diffusion=diff,
            jump=_floats(pt["jump"], "perturb.jump", n) if "jump" in pt else None,
        )

    return Scenario(name, spec, plant, t0, x0, sim, ode_tol, verify, perturb)


def load_toml(source: str | Path) -> tuple[dict, str]:
    """Read a scenario file or built-in name; returns (table, name)."""
    source = str(source)
    if source in BUILTIN:
        text = resources.files("manifold_control.scenarios").joinpath(BUILTIN[source]).read_text()
        name = source
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {source!r}: {exc.strerror}") from None
        name = source
    try:
        return tomllib.loads(text), name
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{name}: {exc}") from None


def load_scenario(source: str | Path = "paper-example") -> Scenario:
    data, name = load_toml(source)
    return scenario_from_dict(data, name)
