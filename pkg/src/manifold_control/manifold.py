"""Manifold function u plus the free auxiliary families of the construction.

``f`` rows shape the diffusion columns, ``h`` rows shape the drift and
``phi`` rows shape the jump flow. Each family is a list of expressions whose
gradients become determinant rows; they must stay functionally independent of
u, which :func:`check_independence` tests numerically at sample points.

The h family may instead be given as raw rows ``(h_i0, h_i1, ..., h_in)``
(``h_rows``); with expression-defined h the time entry is dh_i/dt. The shipped
two-dimensional example writes its single h row as ``(f1, f2, f3)``, i.e. the
names f and h alias there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError
from .expr import Expression, parse

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class ManifoldSpec:
    n: int
    m: int
    u: Expression
    f_funcs: tuple[Expression, ...] = ()
    h_funcs: tuple[Expression, ...] = ()
    phi_funcs: tuple[Expression, ...] = ()
    q00: tuple[Expression, ...] = ()
    h_rows: tuple[tuple[Expression, ...], ...] | None = None

    def __post_init__(self):
        n = self.n
        if n < 2:
            raise DimensionError(f"state dimension must be >= 2, got {n}")
        if self.m < 0:
            raise DimensionError(f"Wiener dimension must be >= 0, got {self.m}")
        exprs = [self.u, *self.f_funcs, *self.h_funcs, *self.phi_funcs, *self.q00]
        exprs += [e for row in (self.h_rows or ()) for e in row]
        for e in exprs:
            if e.n != n:
                raise DimensionError(f"expression {e.source!r} parsed for n={e.n}, spec has n={n}")
        if "gamma" in set().union(*(e.variables for e in exprs)):
            raise ConfigurationError("manifold functions may not depend on gamma")
        if not any(v.startswith("x") for v in self.u.variables):
            raise ConfigurationError(f"u = {self.u.source!r} does not depend on any state variable")
        if len(self.f_funcs) != n - 2:
            raise DimensionError(f"need {n - 2} f functions, got {len(self.f_funcs)}")
        if len(self.phi_funcs) != n - 2:
            raise DimensionError(f"need {n - 2} phi functions, got {len(self.phi_funcs)}")
        if self.h_rows is None:
            if len(self.h_funcs) != n - 1:
                raise DimensionError(f"need {n - 1} h functions, got {len(self.h_funcs)}")
        else:
            if self.h_funcs:
                raise ConfigurationError("give either h functions or raw h rows, not both")
            if len(self.h_rows) != n - 1 or any(len(r) != n + 1 for r in self.h_rows):
                raise DimensionError(f"need {n - 1} raw h rows of length {n + 1}")
        if len(self.q00) != self.m:
            raise DimensionError(f"need one q00 per Wiener column ({self.m}), got {len(self.q00)}")

    def u_value(self, t: float, x: Sequence[float]) -> float:
        return self.u.value(t, x)

    def h_matrix_rows(self, t: float, x: Sequence[float]) -> list[list[float]]:
        """Rows 3..n+1 of the drift determinant, each of length n+1."""
        if self.h_rows is not None:
            return [[e.value(t, x) for e in row] for row in self.h_rows]
        rows = []
        for h in self.h_funcs:
            g = h.raw_grad(t, x)
            rows.append(list(g[1 : 2 + self.n]))
        return rows


@dataclass(frozen=True)
class ManifoldLevel:
    c: float

    def __post_init__(self):
        if not np.isfinite(self.c):
            raise ValueError(f"manifold level must be finite, got {self.c!r}")


def _projection_indices(spec_u: Expression, n: int, t: float, x0: Sequence[float], count: int) -> list[int]:
    """Coordinates to project onto, skipping those u leans on most."""
    g = spec_u.grad(t, x0).dx
    order = sorted(range(n), key=lambda i: -abs(g[i]))
    skip = set(order[: n - count])
    return [i for i in range(n) if i not in skip]


def make_spec(
    n: int,
    m: int,
    u: str,
    *,
    f: Sequence[str] | None = None,
    h: Sequence[str] | None = None,
    h_rows: Sequence[Sequence[str]] | None = None,
    phi: Sequence[str] | None = None,
    q00: Sequence[str] | None = None,
    t0: float = 0.0,
    x0: Sequence[float] | None = None,
) -> ManifoldSpec:
    """Build a spec from expression text, filling omitted families with projections.

    Defaults pick coordinate projections x_j that leave out the coordinates u
    depends on most strongly at ``(t0, x0)``, so the stacked gradients stay
    independent there. q00 defaults to 1 for every Wiener column.
    """
    u_expr = parse(u, n)
    if x0 is None:
        x0 = [1.0] * n
    if f is None:
        f = [f"x{i + 1}" for i in _projection_indices(u_expr, n, t0, x0, n - 2)]
    if phi is None:
        phi = [f"x{i + 1}" for i in _projection_indices(u_expr, n, t0, x0, n - 2)]
    if h is None and h_rows is None:
        h = [f"x{i + 1}" for i in _projection_indices(u_expr, n, t0, x0, n - 1)]
    if q00 is None:
        q00 = ["1"] * m
    return ManifoldSpec(
        n=n,
        m=m,
        u=u_expr,
        f_funcs=tuple(parse(s, n) for s in f),
        h_funcs=tuple(parse(s, n) for s in (h or ())),
        phi_funcs=tuple(parse(s, n) for s in phi),
        q00=tuple(parse(s, n) for s in q00),
        h_rows=None if h_rows is None else tuple(tuple(parse(s, n) for s in row) for row in h_rows),
    )


def grad_u(spec: ManifoldSpec, t: float, x: Sequence[float]) -> tuple[float, np.ndarray]:
    g = spec.u.grad(t, x)
    return g.dt, np.array(g.dx)


def numerical_rank(rows) -> int:
    a = np.atleast_2d(np.asarray(rows, dtype=float))
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


@dataclass
class PointRanks:
    t: float
    x: tuple[float, ...]
    f_rank: int
    phi_rank: int
    h_rank: int


@dataclass
class IndependenceReport:
    n: int
    points: list[PointRanks] = field(default_factory=list)

    @property
    def f_independent(self) -> bool:
        return all(p.f_rank == self.n - 1 for p in self.points)

    @property
    def phi_independent(self) -> bool:
        return all(p.phi_rank == self.n - 1 for p in self.points)

    @property
    def h_independent(self) -> bool:
        return all(p.h_rank == self.n for p in self.points)

    @property
    def independent(self) -> bool:
        return self.f_independent and self.phi_independent and self.h_independent


def check_independence(spec: ManifoldSpec, sample_points: Sequence[tuple[float, Sequence[float]]]) -> IndependenceReport:
    """Numerical rank of the gradient stacks {u, f}, {u, phi} and {u, h} per point."""
    if not sample_points:
        raise ValueError("check_independence needs at least one sample point")
    n = spec.n
    report = IndependenceReport(n)
    for t, x in sample_points:
        x = tuple(float(v) for v in x)
        gu = spec.u.raw_grad(t, x)
        ux = list(gu[2 : 2 + n])
        f_rows = [ux] + [list(f.raw_grad(t, x)[2 : 2 + n]) for f in spec.f_funcs]
        phi_rows = [ux] + [list(p.raw_grad(t, x)[2 : 2 + n]) for p in spec.phi_funcs]
        h_rows = [list(gu[1 : 2 + n])] + spec.h_matrix_rows(t, x)
        report.points.append(
            PointRanks(t, x, numerical_rank(f_rows), numerical_rank(phi_rows), numerical_rank(h_rows))
        )
    return report
