"""Coefficients A, B, G that make u a first integral of the jump-diffusion.

* diffusion: B_k = q00_k * cross(grad u, grad f_3, ..., grad f_n), so every
  column is orthogonal to grad u;
* drift: A = R + 1/2 sum_k J(B_k) B_k where R is read off the cofactor
  expansion of the (n+1)x(n+1) determinant with basis row (e_0..e_n), the
  space-time gradient row (du/dt, grad u) and the h rows, normalised so the
  e_0 coefficient is 1;
* jumps: G(t, x, gamma) = y(gamma) - x where y solves
  dy/dgamma = alpha * cross(grad u(t, y), grad phi_3(t, y), ...), y(0) = x.
  This flow keeps u constant, so x -> x + G preserves u for every mark.

Jacobians of B are central finite differences (step max(1e-6, 1e-6|x_j|)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DegeneratePointError, IntegrationError
from .manifold import ManifoldSpec
from .nlinalg import cross_lists, fd_step

DEGENERATE_C0 = 1e-12
DEFAULT_ODE_TOL = 1e-10


def _base_column(spec: ManifoldSpec, t: float, x: Sequence[float]) -> list[float]:
    n = spec.n
    gu = spec.u.raw_grad(t, x)
    rows = [list(gu[2 : 2 + n])]
    if not any(rows[0]):
        raise DegeneratePointError("grad u vanishes", t, x)
    for f in spec.f_funcs:
        rows.append(list(f.raw_grad(t, x)[2 : 2 + n]))
    v = cross_lists(rows)
    if not any(v):
        warnings.warn(f"f rows are dependent on grad u at t={t}, x={tuple(x)}; diffusion column is zero")
    return v


def _q00(spec: ManifoldSpec, k: int, t: float, x: Sequence[float]) -> float:
    q = spec.q00[k].raw_value(t, x)
    if q == 0.0:
        raise ConfigurationError(f"q00[{k + 1}] = {spec.q00[k].source!r} vanishes at t={t}, x={tuple(x)}")
    return q


def _columns(spec: ManifoldSpec, t: float, x: Sequence[float]) -> list[list[float]]:
    if spec.m == 0:
        return []
    base = _base_column(spec, t, x)
    cols = []
    for k in range(spec.m):
        q = _q00(spec, k, t, x)
        cols.append([q * v for v in base])
    return cols


def diffusion_column(spec: ManifoldSpec, k: int, t: float, x: Sequence[float]) -> np.ndarray:
    """Column k (1-based) of B."""
    if not 1 <= k <= spec.m:
        raise IndexError(f"Wiener column {k} out of range 1..{spec.m}")
    base = _base_column(spec, t, x)
    q = _q00(spec, k - 1, t, x)
    return np.array([q * v for v in base])


def diffusion_matrix(spec: ManifoldSpec, t: float, x: Sequence[float]) -> np.ndarray:
    cols = _columns(spec, t, x)
    if not cols:
        return np.zeros((spec.n, 0))
    return np.array(cols).T


def drift_vector_field(spec: ManifoldSpec, t: float, x: Sequence[float]) -> list[float]:
    """R: normalised e_1..e_n cofactors of the drift determinant."""
    n = spec.n
    gu = spec.u.raw_grad(t, x)
    rows = [list(gu[1 : 2 + n])] + spec.h_matrix_rows(t, x)
    c = cross_lists(rows)
    c0 = c[0]
    if abs(c0) < DEGENERATE_C0:
        raise DegeneratePointError(f"cofactor of e_0 is {c0!r} (degenerate h rows)", t, x)
    return [ci / c0 for ci in c[1:]]


def _ito_correction(spec: ManifoldSpec, t: float, x: Sequence[float], cols: list[list[float]]) -> list[float]:
    """1/2 sum_k J(B_k) B_k with central-difference Jacobians."""
    n = spec.n
    out = [0.0] * n
    if not cols:
        return out
    xs = [float(v) for v in x]
    for j in range(n):
        h = fd_step(xs[j])
        xp = xs.copy()
        xm = xs.copy()
        xp[j] += h
        xm[j] -= h
        width = xp[j] - xm[j]
        cp = _columns(spec, t, xp)
        cm = _columns(spec, t, xm)
        for k, col in enumerate(cols):
            bj = col[j]
            if bj == 0.0:
                continue
            pk, mk = cp[k], cm[k]
            for i in range(n):
                out[i] += 0.5 * (pk[i] - mk[i]) / width * bj
    return out


def drift_and_diffusion(spec: ManifoldSpec, t: float, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """(A, B) sharing the evaluation of B at x."""
    x = [float(v) for v in x]
    cols = _columns(spec, t, x)
    r = drift_vector_field(spec, t, x)
    corr = _ito_correction(spec, t, x, cols)
    a = np.array([ri + ci for ri, ci in zip(r, corr)])
    b = np.array(cols).T if cols else np.zeros((spec.n, 0))
    return a, b


def drift(spec: ManifoldSpec, t: float, x: Sequence[float]) -> np.ndarray:
    return drift_and_diffusion(spec, t, x)[0]


# -------------------------------------------------------------------- jump flow


def _flow_rhs(spec: ManifoldSpec, t: float, alpha: float):
    n = spec.n
    u = spec.u
    phis = spec.phi_funcs

    def rhs(y: list[float]) -> list[float]:
        rows = [list(u.raw_grad(t, y)[2 : 2 + n])]
        for p in phis:
            rows.append(list(p.raw_grad(t, y)[2 : 2 + n]))
        v = cross_lists(rows)
        return [alpha * vi for vi in v] if alpha != 1.0 else v

    return rhs


def _rk4(rhs, y: list[float], k1: list[float], h: float) -> list[float]:
    n = len(y)
    y2 = [y[i] + 0.5 * h * k1[i] for i in range(n)]
    k2 = rhs(y2)
    y3 = [y[i] + 0.5 * h * k2[i] for i in range(n)]
    k3 = rhs(y3)
    y4 = [y[i] + h * k3[i] for i in range(n)]
    k4 = rhs(y4)
    return [y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(n)]


def _integrate_flow(rhs, y0: list[float], targets: list[float], tol: float) -> list[list[float]]:
    """RK4 with step doubling from gamma=0 through ``targets`` (same sign, increasing |gamma|)."""
    y = list(y0)
    s = 0.0
    sign = 1.0 if targets[-1] >= 0 else -1.0
    h = min(abs(targets[-1]), 0.125)
    out = []
    for target in targets:
        goal = abs(target)
        while s < goal:
            step = min(h, goal - s)
            last = step == goal - s
            k1 = rhs(y)
            full = _rk4(rhs, y, k1, sign * step)
            mid = _rk4(rhs, y, k1, 0.5 * sign * step)
            fine = _rk4(rhs, mid, rhs(mid), 0.5 * sign * step)
            err = 0.0
            for a, b in zip(fine, full):
                e = abs(a - b) / (15.0 * (1.0 + abs(a)))
                if e > err:
                    err = e
            if not math.isfinite(err):
                raise IntegrationError("non-finite state in jump flow", sign * s)
            if err <= tol:
                y = [a + (a - b) / 15.0 for a, b in zip(fine, full)]
                s = goal if last else s + step
                grow = 4.0 if err == 0.0 else min(4.0, 0.9 * (tol / err) ** 0.2)
                h = max(h, step * grow) if last else step * grow
            else:
                h = step * max(0.1, 0.9 * (tol / err) ** 0.2)
                if h < 1e-14 * max(1.0, goal):
                    raise IntegrationError("step size underflow in jump flow", sign * s)
        out.append(list(y))
    return out


def jump_path(
    spec: ManifoldSpec,
    t: float,
    x: Sequence[float],
    gammas: Sequence[float],
    ode_tol: float = DEFAULT_ODE_TOL,
    alpha: float = 1.0,
) -> np.ndarray:
    """G(t, x, gamma) for every gamma in ``gammas`` from one pass of the flow per sign."""
    x0 = [float(v) for v in x]
    if len(x0) != spec.n:
        raise ValueError(f"expected {spec.n} state values, got {len(x0)}")
    result = np.zeros((len(gammas), spec.n))
    rhs = _flow_rhs(spec, t, alpha)
    for sign in (1.0, -1.0):
        idx = sorted((i for i, g in enumerate(gammas) if g * sign > 0), key=lambda i: abs(gammas[i]))
        if not idx:
            continue
        ys = _integrate_flow(rhs, x0, [float(gammas[i]) for i in idx], ode_tol)
        for i, y in zip(idx, ys):
            result[i] = [yi - xi for yi, xi in zip(y, x0)]
    return result


def jump_displacement(
    spec: ManifoldSpec,
    t: float,
    x: Sequence[float],
    gamma: float,
    ode_tol: float = DEFAULT_ODE_TOL,
    alpha: float = 1.0,
) -> np.ndarray:
    if gamma == 0.0:
        return np.zeros(spec.n)
    return jump_path(spec, t, x, [gamma], ode_tol, alpha)[0]


@dataclass(frozen=True)
class SynthesizedSystem:
    """Evaluators for A, B, G built from one ManifoldSpec.

    ``alpha`` rescales the jump flow (it only reparameterises gamma).
    """

    spec: ManifoldSpec
    ode_tol: float = DEFAULT_ODE_TOL
    alpha: float = 1.0

    def drift(self, t: float, x: Sequence[float]) -> np.ndarray:
        return drift(self.spec, t, x)

    def diffusion(self, t: float, x: Sequence[float]) -> np.ndarray:
        return diffusion_matrix(self.spec, t, x)

    def drift_and_diffusion(self, t: float, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        return drift_and_diffusion(self.spec, t, x)

    def jump(self, t: float, x: Sequence[float], gamma: float) -> np.ndarray:
        return jump_displacement(self.spec, t, x, gamma, self.ode_tol, self.alpha)

    def jump_path(self, t: float, x: Sequence[float], gammas: Sequence[float]) -> np.ndarray:
        return jump_path(self.spec, t, x, gammas, self.ode_tol, self.alpha)
