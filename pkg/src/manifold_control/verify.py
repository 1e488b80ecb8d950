"""Residuals of the first-integral conditions for a system with coefficients A, B, G.

Any object with ``spec`` (a ManifoldSpec) and ``drift``, ``diffusion``,
``jump`` evaluators can be checked. Four residuals per point:

* wiener:    max_k |B_k . grad u| / (1 + |B_k| |grad u|)
* drift:     |du/dt + grad u . (A - 1/2 sum_k J(B_k) B_k)|
* jump:      max over a gamma grid of |u(t, x + G) - u(t, x)|
* generator: |du/dt + grad u . A + 1/2 sum_k B_k^T Hess(u) B_k|

Tolerances follow the numerical source of each residual: exact algebra for
wiener, FD Jacobians for drift, the jump-flow ODE for jump and FD Hessians for
the generator.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .nlinalg import jacobian_fd


@dataclass(frozen=True)
class Tolerances:
    wiener: float = 1e-9
    drift: float = 1e-5
    jump: float = 1e-7
    generator: float = 1e-4


def _grad(system, t, x) -> tuple[float, np.ndarray]:
    g = system.spec.u.grad(t, x)
    return g.dt, np.array(g.dx)


def wiener_residual(system, t: float, x: Sequence[float]) -> float:
    _, gu = _grad(system, t, x)
    b = np.asarray(system.diffusion(t, x), dtype=float)
    norm_u = float(np.linalg.norm(gu))
    worst = 0.0
    for k in range(b.shape[1]):
        col = b[:, k]
        r = abs(float(col @ gu)) / (1.0 + float(np.linalg.norm(col)) * norm_u)
        worst = max(worst, r)
    return worst


def ito_correction(system, t: float, x: Sequence[float]) -> np.ndarray:
    """1/2 sum_k J(B_k) B_k of the system's own diffusion, by central differences."""
    b = np.asarray(system.diffusion(t, x), dtype=float)
    out = np.zeros(b.shape[0])
    for k in range(b.shape[1]):
        jac = jacobian_fd(lambda y, k=k: np.asarray(system.diffusion(t, y))[:, k], x)
        out += 0.5 * jac @ b[:, k]
    return out


def drift_residual(system, t: float, x: Sequence[float]) -> float:
    ut, gu = _grad(system, t, x)
    a = np.asarray(system.drift(t, x), dtype=float)
    return abs(ut + float(gu @ (a - ito_correction(system, t, x))))


def jump_residual(system, t: float, x: Sequence[float], gamma_grid: Sequence[float]) -> float:
    u = system.spec.u
    u0 = u.value(t, x)
    if len(gamma_grid) == 0:
        return 0.0
    if hasattr(system, "jump_path"):
        gs = np.asarray(system.jump_path(t, x, list(gamma_grid)))
    else:
        gs = np.array([system.jump(t, x, g) for g in gamma_grid])
    xa = np.asarray(x, dtype=float)
    return max(abs(u.value(t, tuple(float(v) for v in xa + g)) - u0) for g in gs)


def hessian_u(system, t: float, x: Sequence[float]) -> np.ndarray:
    """Hessian of u by central differences of its exact gradient."""
    u = system.spec.u
    return jacobian_fd(lambda y: u.grad(t, tuple(y)).dx, x)


def generator_residual(system, t: float, x: Sequence[float]) -> float:
    ut, gu = _grad(system, t, x)
    a = np.asarray(system.drift(t, x), dtype=float)
    b = np.asarray(system.diffusion(t, x), dtype=float)
    total = ut + float(gu @ a)
    if b.shape[1]:
        hu = hessian_u(system, t, x)
        total += 0.5 * sum(float(b[:, k] @ hu @ b[:, k]) for k in range(b.shape[1]))
    return abs(total)


@dataclass
class ResidualRecord:
    t: float
    x: tuple[float, ...]
    wiener: float
    drift: float
    jump: float
    generator: float

    def failures(self, tol: Tolerances) -> list[str]:
        return [name for name in ("wiener", "drift", "jump", "generator") if not getattr(self, name) < getattr(tol, name)]


@dataclass
class ResidualReport:
    records: list[ResidualRecord] = field(default_factory=list)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def summary(self) -> dict:
        out = {}
        for name in ("wiener", "drift", "jump", "generator"):
            vals = [getattr(r, name) for r in self.records]
            out[name] = {
                "max": max(vals) if vals else 0.0,
                "mean": float(np.mean(vals)) if vals else 0.0,
                "tolerance": getattr(self.tolerances, name),
            }
        return out

    def first_failure(self) -> ResidualRecord | None:
        for r in self.records:
            if r.failures(self.tolerances):
                return r
        return None

    @property
    def passed(self) -> bool:
        return self.first_failure() is None

    def to_dict(self, include_points: bool = True) -> dict:
        bad = self.first_failure()
        out = {
            "passed": bad is None,
            "points": len(self.records),
            "summary": self.summary(),
            "first_failure": None if bad is None else dict(asdict(bad), failed=bad.failures(self.tolerances)),
        }
        if include_points:
            out["records"] = [asdict(r) for r in self.records]
        return out


def residual_report(
    system,
    points: Sequence[tuple[float, Sequence[float]]],
    gamma_grid: Sequence[float],
    tolerances: Tolerances | None = None,
) -> ResidualReport:
    report = ResidualReport(tolerances=tolerances or Tolerances())
    for t, x in points:
        x = tuple(float(v) for v in x)
        report.records.append(
            ResidualRecord(
                t=float(t),
                x=x,
                wiener=wiener_residual(system, t, x),
                drift=drift_residual(system, t, x),
                jump=jump_residual(system, t, x, gamma_grid),
                generator=generator_residual(system, t, x),
            )
        )
    return report


def sample_box(
    t_box: tuple[float, float],
    x_box: Sequence[tuple[float, float]],
    count: int,
    seed: int,
) -> list[tuple[float, tuple[float, ...]]]:
    """Uniform points in [t_lo, t_hi] x prod [x_lo, x_hi]; low > high is an error."""
    if count < 1:
        raise ValueError(f"sample count must be >= 1, got {count}")
    bounds = [tuple(t_box)] + [tuple(b) for b in x_box]
    for lo, hi in bounds:
        if not lo <= hi:
            raise ValueError(f"empty sample box interval [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    pts = lo + (hi - lo) * rng.random((count, len(bounds)))
    return [(float(p[0]), tuple(float(v) for v in p[1:])) for p in pts]


@dataclass(frozen=True)
class PerturbedSystem:
    """Adds constant offsets to A, B or G of another system (detector checks)."""

    base: object
    drift_offset: tuple[float, ...] | None = None
    diffusion_offset: tuple[tuple[float, ...], ...] | None = None
    jump_offset: tuple[float, ...] | None = None

    @property
    def spec(self):
        return self.base.spec

    def drift(self, t, x):
        a = np.asarray(self.base.drift(t, x), dtype=float)
        return a if self.drift_offset is None else a + np.asarray(self.drift_offset)

    def diffusion(self, t, x):
        b = np.asarray(self.base.diffusion(t, x), dtype=float)
        return b if self.diffusion_offset is None else b + np.asarray(self.diffusion_offset, dtype=float).reshape(b.shape)

    def jump(self, t, x, gamma):
        g = np.asarray(self.base.jump(t, x, gamma), dtype=float)
        return g if self.jump_offset is None else g + np.asarray(self.jump_offset)

    def jump_path(self, t, x, gammas):
        if hasattr(self.base, "jump_path"):
            gs = np.asarray(self.base.jump_path(t, x, gammas), dtype=float)
        else:
            gs = np.array([self.base.jump(t, x, g) for g in gammas])
        return gs if self.jump_offset is None else gs + np.asarray(self.jump_offset)
