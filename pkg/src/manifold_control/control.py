"""Program control s(t, x) that turns the plant drift P + Q s into the synthesized A.

The plant's responses to noise are not givens: the controlled system takes B and
G straight from the synthesis, and only the drift is matched through s.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InfeasibleControlError, SingularChannelError, SingularMatrixError
from .expr import Expression, parse
from .manifold import ManifoldLevel, ManifoldSpec
from .nlinalg import solve_linear
from .synthesis import DEFAULT_ODE_TOL, SynthesizedSystem

FEASIBILITY_TOL = 1e-8


@dataclass(frozen=True)
class PlantSpec:
    P: tuple[Expression, ...]
    Q: tuple[tuple[Expression, ...], ...]

    def __post_init__(self):
        n = len(self.P)
        if len(self.Q) != n:
            raise DimensionError(f"Q has {len(self.Q)} rows, P has {n} entries")
        r = len(self.Q[0]) if self.Q else 0
        if r < 1 or any(len(row) != r for row in self.Q):
            raise DimensionError("Q must be a rectangular n x r matrix with r >= 1")
        if any("gamma" in e.variables for e in (*self.P, *(q for row in self.Q for q in row))):
            raise DimensionError("plant expressions may not depend on gamma")

    @property
    def n(self) -> int:
        return len(self.P)

    @property
    def r(self) -> int:
        return len(self.Q[0])

    @classmethod
    def from_text(cls, P: Sequence[str], Q: Sequence[Sequence[str]]) -> "PlantSpec":
        n = len(P)
        return cls(tuple(parse(p, n) for p in P), tuple(tuple(parse(q, n) for q in row) for row in Q))

    def p_value(self, t: float, x: Sequence[float]) -> np.ndarray:
        return np.array([e.raw_value(t, x) for e in self.P])

    def q_value(self, t: float, x: Sequence[float]) -> np.ndarray:
        return np.array([[e.raw_value(t, x) for e in row] for row in self.Q])


def solve_control(plant: PlantSpec, target_drift: Sequence[float], t: float, x: Sequence[float]) -> np.ndarray:
    """s with P(t, x) + Q(t, x) s = target_drift.

    Square channels are solved exactly; tall ones (r < n) by least squares and
    accepted only if consistent; wide ones (r > n) get the minimum-norm s.
    """
    s, _, _ = _solve(plant, target_drift, t, x)
    return s


def _solve(plant: PlantSpec, target_drift, t, x):
    a = np.asarray(target_drift, dtype=float)
    if a.shape != (plant.n,):
        raise DimensionError(f"target drift has shape {a.shape}, plant needs ({plant.n},)")
    if len(x) != plant.n:
        raise DimensionError(f"expected {plant.n} state values, got {len(x)}")
    x = [float(v) for v in x]
    p = plant.p_value(t, x)
    q = plant.q_value(t, x)
    rhs = a - p
    if plant.r == plant.n:
        try:
            return solve_linear(q, rhs), p, q
        except SingularMatrixError as exc:
            raise SingularChannelError(f"control channel Q is singular at t={t}, x={tuple(x)}: {exc}") from None
    s = np.linalg.lstsq(q, rhs, rcond=None)[0]
    residual = float(np.max(np.abs(q @ s - rhs)))
    if residual >= FEASIBILITY_TOL:
        raise InfeasibleControlError(f"target drift not reachable through Q at t={t}, x={tuple(x)}", residual)
    return s, p, q


@dataclass(frozen=True)
class ControlledSystem:
    plant: PlantSpec
    synthesized: SynthesizedSystem
    level: ManifoldLevel
    t0: float
    x0: tuple[float, ...]

    @property
    def spec(self) -> ManifoldSpec:
        return self.synthesized.spec

    def u(self, t: float, x: Sequence[float]) -> float:
        return self.spec.u.value(t, x)

    def control(self, t: float, x: Sequence[float]) -> np.ndarray:
        return solve_control(self.plant, self.synthesized.drift(t, x), t, x)

    def coefficients(self, t: float, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(effective drift P + Q s, control s, diffusion B) at one point."""
        a, b = self.synthesized.drift_and_diffusion(t, x)
        s, p, q = _solve(self.plant, a, t, x)
        eff = p + q @ s
        return eff, s, b

    def drift(self, t: float, x: Sequence[float]) -> np.ndarray:
        return self.coefficients(t, x)[0]

    def diffusion(self, t: float, x: Sequence[float]) -> np.ndarray:
        return self.synthesized.diffusion(t, x)

    def jump(self, t: float, x: Sequence[float], gamma: float) -> np.ndarray:
        return self.synthesized.jump(t, x, gamma)

    def jump_path(self, t: float, x: Sequence[float], gammas: Sequence[float]) -> np.ndarray:
        return self.synthesized.jump_path(t, x, gammas)


def build_controlled_system(
    spec: ManifoldSpec,
    plant: PlantSpec,
    x0: Sequence[float],
    t0: float = 0.0,
    ode_tol: float = DEFAULT_ODE_TOL,
    alpha: float = 1.0,
) -> ControlledSystem:
    """Package the controlled system, checking synthesis and control at (t0, x0)."""
    x0 = tuple(float(v) for v in x0)
    if len(x0) != spec.n or plant.n != spec.n:
        raise DimensionError(f"x0 has {len(x0)} entries, plant n={plant.n}, manifold n={spec.n}")
    system = ControlledSystem(plant, SynthesizedSystem(spec, ode_tol, alpha), ManifoldLevel(spec.u.value(t0, x0)), t0, x0)
    system.coefficients(t0, x0)
    return system
