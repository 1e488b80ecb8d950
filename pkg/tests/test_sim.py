import math
from dataclasses import dataclass

import numpy as np
import pytest

from conftest import U_TEXT, closed_form_g, u_example
from manifold_control.config import load_scenario
from manifold_control.control import build_controlled_system
from manifold_control.expr import parse
from manifold_control.manifold import ManifoldLevel
from manifold_control.sim import (
    Degenerate,
    Exponential,
    JumpMeasureConfig,
    SimConfig,
    Uniform,
    monte_carlo,
    path_rng,
    simulate_path,
    step,
)

JUMPS = JumpMeasureConfig(2.0, Uniform(0.0, 1.0))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0, T=1.0)
    with pytest.raises(ValueError):
        SimConfig(dt=2.0, T=1.0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, T=1.0, paths=0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, T=1.0, seed=-1)
    with pytest.raises(ValueError):
        JumpMeasureConfig(-1.0)
    with pytest.raises(ValueError):
        Uniform(1.0, 0.0)
    with pytest.raises(ValueError):
        Exponential(0.0)
    assert SimConfig(dt=1e-3, T=1.0).n_steps == 1000
    assert SimConfig(dt=0.3, T=1.0).n_steps == 4
    assert SimConfig(dt=0.1, T=0.0).n_steps == 0


def test_streams_are_independent_and_reproducible():
    a = path_rng(42, 0).standard_normal(4)
    assert np.array_equal(a, path_rng(42, 0).standard_normal(4))
    assert not np.array_equal(a, path_rng(42, 1).standard_normal(4))
    assert not np.array_equal(a, path_rng(43, 0).standard_normal(4))


def test_zero_horizon_gives_one_sample(paper_system):
    rec = simulate_path(paper_system, SimConfig(dt=1e-3, T=0.0, jumps=JUMPS))
    assert len(rec.samples) == 1
    assert rec.samples[0].x == (0.0, 1.0) and rec.samples[0].u == 1.0
    assert rec.sup_deviation == 0.0


def test_record_stride_and_final_step(paper_system):
    cfg = SimConfig(dt=0.01, T=0.1, record_stride=3, jumps=JUMPS, seed=5)
    rec = simulate_path(paper_system, cfg, 0)
    assert [s.step for s in rec.samples] == [0, 3, 6, 9, 10]
    assert rec.samples[-1].t == pytest.approx(0.1)
    assert sum(s.jumps for s in rec.samples) == rec.total_jumps


def test_jumps_keep_u_exactly(paper_system):
    # diffusion off via a zero-noise wrapper: only drift and jumps move the state
    @dataclass(frozen=True)
    class NoNoise:
        base: object

        def __getattr__(self, name):
            return getattr(self.base, name)

        def coefficients(self, t, x):
            return np.zeros(2), np.zeros(2), np.zeros((2, 0))

    sysn = NoNoise(paper_system)
    cfg = SimConfig(dt=0.01, T=1.0, jumps=JumpMeasureConfig(20.0, Uniform(0.0, 1.0)), seed=1)
    rec = simulate_path(sysn, cfg, 0)
    assert rec.total_jumps > 5
    assert rec.sup_deviation < 1e-9


def test_paths_one_equals_simulate_path(paper_system):
    cfg = SimConfig(dt=0.01, T=0.2, paths=1, jumps=JUMPS, seed=9)
    report, records = monte_carlo(paper_system, cfg, keep_paths=True)
    rec = simulate_path(paper_system, cfg, 0)
    assert records[0].samples == rec.samples
    assert report.median == rec.sup_deviation


def test_workers_do_not_change_results(paper_system):
    cfg = SimConfig(dt=0.01, T=0.3, paths=6, jumps=JUMPS, seed=4)
    r1, rec1 = monte_carlo(paper_system, cfg, workers=1, keep_paths=True)
    r2, rec2 = monte_carlo(paper_system, cfg, workers=2, keep_paths=True)
    assert r1.to_dict() == r2.to_dict()
    assert [r.samples for r in rec1] == [r.samples for r in rec2]


def test_aborted_paths_are_excluded(paper_system):
    cfg = SimConfig(dt=0.02, T=3.0, paths=12, jumps=JUMPS, seed=42)
    report, records = monte_carlo(paper_system, cfg)
    d = report.to_dict()
    assert d["completed"] + d["aborted"] == 12
    for i in report.aborted:
        assert d["sup_deviations"][i] is None
        assert records[i].aborted
    done = [r.sup_deviation for r in records if r.aborted is None]
    if done:
        assert report.median == pytest.approx(float(np.median(done)))


@dataclass(frozen=True)
class _Still:
    """Zero coefficients: only the jump counter matters."""

    t0: float = 0.0
    x0: tuple = (0.0, 1.0)
    level: ManifoldLevel = ManifoldLevel(1.0)

    @property
    def spec(self):
        return _SPEC

    def coefficients(self, t, x):
        return np.zeros(2), np.zeros(2), np.zeros((2, 0))

    def jump(self, t, x, gamma):
        return np.zeros(2)


class _Spec:
    u = parse(U_TEXT, 2)


_SPEC = _Spec()


def test_poisson_mean_jump_count():
    paths, rate, T = 10_000, 2.0, 1.0
    cfg = SimConfig(dt=0.1, T=T, paths=paths, seed=123, jumps=JumpMeasureConfig(rate, Degenerate(0.5)))
    report, _ = monte_carlo(_Still(), cfg)
    sigma = math.sqrt(rate * T / paths)
    assert abs(report.mean_jumps - rate * T) < 3 * sigma


@dataclass(frozen=True)
class ClosedFormJumps:
    """Controlled system with the exact jump map; logs |u| change at every jump."""

    base: object
    log: list

    def __getattr__(self, name):
        return getattr(self.base, name)

    def jump(self, t, x, gamma):
        g = closed_form_g(x, gamma)
        self.log.append(abs(u_example(np.add(x, g)) - u_example(x)))
        return g


def test_single_path_adherence(paper_system):
    cfg = SimConfig(dt=1e-3, T=1.0, jumps=JUMPS, seed=42)
    rec = simulate_path(paper_system, cfg, 0)
    assert rec.aborted is None
    assert math.isfinite(rec.sup_deviation) and rec.sup_deviation < 0.05
    assert all(a.t < b.t for a, b in zip(rec.samples, rec.samples[1:]))


def test_deterministic_step_is_euler():
    sc = load_scenario("deterministic")
    system = build_controlled_system(sc.spec, sc.plant, sc.x0, sc.t0)
    x = (0.2, 1.3)
    x_next, count = step(system, 0.0, x, 0.01, path_rng(0, 0), sc.sim.jumps)
    assert count == 0
    assert np.allclose(x_next, np.add(x, 0.01 * np.array([-1.0, -2.0 * 1.3])), rtol=1e-12)


def test_closed_form_jumps_conserve_u(paper_system):
    log = []
    cfg = SimConfig(dt=4e-3, T=1.0, paths=8, jumps=JumpMeasureConfig(10.0, Uniform(0.0, 1.0)), seed=42)
    monte_carlo(ClosedFormJumps(paper_system, log), cfg)
    assert len(log) > 40
    assert max(log) < 1e-12


@pytest.mark.xfail(
    strict=True,
    reason="jumps raise x1 and shrink |B| ~ exp(-2 x1), so frequent jumps lower the deviation by ~3x",
)
def test_jump_rate_barely_changes_adherence(paper_system):
    medians = []
    for rate in (0.0, 10.0):
        cfg = SimConfig(dt=4e-3, T=1.0, paths=128, jumps=JumpMeasureConfig(rate, Uniform(0.0, 1.0)), seed=42)
        report, _ = monte_carlo(ClosedFormJumps(paper_system, []), cfg)
        medians.append(report.median)
    assert max(medians) / min(medians) <= 2.0
