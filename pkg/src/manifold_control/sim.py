"""Euler-Maruyama simulation of the controlled jump-diffusion and adherence statistics.

Each step takes the Euler-Maruyama move with the controlled drift and the
synthesized B, then applies N ~ Poisson(rate * dt) jumps one after another,
each at the state left by the previous one. G preserves u exactly, so applying
jumps sequentially keeps them on the manifold and only the diffusion
discretisation moves u. The Poisson measure is non-centered: no compensator
enters the drift.

Every path draws from its own Philox (counter-based) stream keyed by
``(seed, path_index)``, so results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ManifoldControlError


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"uniform marks need low < high, got [{self.low}, {self.high}]")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"exponential marks need rate > 0, got {self.rate}")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.exponential(1.0 / self.rate))


@dataclass(frozen=True)
class Degenerate:
    value: float

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.value)


MarkDistribution = Uniform | Exponential | Degenerate


@dataclass(frozen=True)
class JumpMeasureConfig:
    rate: float = 0.0
    mark: MarkDistribution = Degenerate(0.0)

    def __post_init__(self):
        if not self.rate >= 0:
            raise ValueError(f"jump intensity must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class SimConfig:
    dt: float
    T: float
    paths: int = 1
    seed: int = 0
    record_stride: int = 1
    jumps: JumpMeasureConfig = JumpMeasureConfig()

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.T < 0:
            raise ValueError(f"horizon T must be >= 0, got {self.T}")
        if self.T > 0 and self.dt > self.T:
            raise ValueError(f"dt={self.dt} exceeds horizon T={self.T}")
        if self.paths < 1:
            raise ValueError(f"paths must be >= 1, got {self.paths}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def n_steps(self) -> int:
        return max(0, math.ceil(self.T / self.dt - 1e-9))


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Independent stream for one path: Philox keyed by (seed, path_index)."""
    return np.random.Generator(np.random.Philox(key=(int(path_index) << 64) | int(seed)))


def step(system, t: float, x: Sequence[float], dt: float, rng: np.random.Generator, jumps: JumpMeasureConfig):
    """One Euler-Maruyama step plus sequential Poisson jumps -> (x_next, jump_count)."""
    x = [float(v) for v in x]
    drift, _, b = system.coefficients(t, x)
    x_next = np.asarray(x, dtype=float) + drift * dt
    if b.shape[1]:
        x_next = x_next + b @ rng.standard_normal(b.shape[1]) * math.sqrt(dt)
    count = int(rng.poisson(jumps.rate * dt)) if jumps.rate > 0 else 0
    for _ in range(count):
        gamma = jumps.mark.sample(rng)
        x_next = x_next + system.jump(t, tuple(x_next), gamma)
    if not np.all(np.isfinite(x_next)):
        raise FloatingPointError(f"state left the finite range at t={t}")
    return x_next, count


@dataclass
class Sample:
    step: int
    t: float
    x: tuple[float, ...]
    u: float
    jumps: int


@dataclass
class TrajectoryRecord:
    path_index: int
    samples: list[Sample] = field(default_factory=list)
    sup_deviation: float = 0.0
    total_jumps: int = 0
    aborted: str | None = None
    abort_time: float | None = None


def simulate_path(controlled, cfg: SimConfig, path_index: int = 0) -> TrajectoryRecord:
    """One path from (t0, x0); coefficient failures end the path with a diagnostic."""
    rng = path_rng(cfg.seed, path_index)
    level = controlled.level.c
    u = controlled.spec.u
    t0 = controlled.t0
    x = np.array(controlled.x0, dtype=float)
    n_steps = cfg.n_steps
    rec = TrajectoryRecord(path_index)
    rec.samples.append(Sample(0, t0, tuple(x.tolist()), u.value(t0, x), 0))
    pending = 0
    t = t0
    for k in range(1, n_steps + 1):
        t_next = t0 + min(k * cfg.dt, cfg.T)
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                x, count = step(controlled, t, x, t_next - t, rng, cfg.jumps)
            x_t = tuple(x.tolist())
            uval = u.value(t_next, x_t)
        except (ManifoldControlError, FloatingPointError, OverflowError, ValueError) as exc:
            rec.aborted = f"{type(exc).__name__}: {exc}"
            rec.abort_time = t
            break
        t = t_next
        pending += count
        rec.total_jumps += count
        dev = abs(uval - level)
        if dev > rec.sup_deviation:
            rec.sup_deviation = dev
        if k % cfg.record_stride == 0 or k == n_steps:
            rec.samples.append(Sample(k, t, x_t, uval, pending))
            pending = 0
    return rec


@dataclass
class AdherenceReport:
    sup_deviations: list[float]
    aborted: list[int]
    median: float
    mean: float
    p95: float
    dt: float
    T: float
    rate: float
    paths: int
    seed: int
    mean_jumps: float
    abort_reasons: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "T": self.T,
            "rate": self.rate,
            "paths": self.paths,
            "seed": self.seed,
            "completed": self.paths - len(self.aborted),
            "aborted": len(self.aborted),
            "aborted_paths": {str(i): self.abort_reasons[i] for i in self.aborted},
            "median": self.median,
            "mean": self.mean,
            "p95": self.p95,
            "mean_jumps": self.mean_jumps,
            "sup_deviations": [None if i in self.abort_reasons else d for i, d in enumerate(self.sup_deviations)],
        }


def _run_paths(controlled, cfg: SimConfig, indices: Sequence[int], keep: bool) -> list[TrajectoryRecord]:
    out = []
    for i in indices:
        rec = simulate_path(controlled, cfg, i)
        if not keep:
            rec.samples = []
        out.append(rec)
    return out


def monte_carlo(controlled, cfg: SimConfig, workers: int = 1, keep_paths: bool = False):
    """Run cfg.paths independent paths; returns (AdherenceReport, records).

    Statistics cover completed paths only; aborted paths are counted and listed.
    ``records`` keeps per-path samples only when ``keep_paths`` is set.
    """
    indices = list(range(cfg.paths))
    if workers <= 1:
        records = _run_paths(controlled, cfg, indices, keep_paths)
    else:
        chunks = [indices[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_paths, [controlled] * workers, [cfg] * workers, chunks, [keep_paths] * workers)
            records = [r for part in parts for r in part]
        records.sort(key=lambda r: r.path_index)

    done = sorted(r.sup_deviation for r in records if r.aborted is None)
    if done:
        arr = np.array(done)
        median, mean, p95 = float(np.median(arr)), float(np.mean(arr)), float(np.percentile(arr, 95))
    else:
        median = mean = p95 = math.nan
    report = AdherenceReport(
        sup_deviations=[r.sup_deviation for r in records],
        aborted=[r.path_index for r in records if r.aborted is not None],
        median=median,
        mean=mean,
        p95=p95,
        dt=cfg.dt,
        T=cfg.T,
        rate=cfg.jumps.rate,
        paths=cfg.paths,
        seed=cfg.seed,
        mean_jumps=float(np.mean([r.total_jumps for r in records])),
        abort_reasons={r.path_index: r.aborted for r in records if r.aborted is not None},
    )
    return report, records
