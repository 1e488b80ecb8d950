"""Synthesis and control of jump-diffusion systems that stay on a manifold u(t, x) = const."""

from .config import Scenario, load_scenario
from .control import ControlledSystem, PlantSpec, build_controlled_system, solve_control
from .expr import Expression, parse
from .manifold import ManifoldSpec, make_spec
from .nlinalg import cross_nd, det
from .sim import JumpMeasureConfig, SimConfig, Uniform, monte_carlo, simulate_path
from .synthesis import SynthesizedSystem, diffusion_matrix, drift, jump_displacement
from .verify import Tolerances, residual_report, sample_box

__all__ = [
    "ControlledSystem", "Expression", "JumpMeasureConfig", "ManifoldSpec", "PlantSpec", "Scenario",
    "SimConfig", "SynthesizedSystem", "Tolerances", "Uniform", "build_controlled_system", "cross_nd",
    "det", "diffusion_matrix", "drift", "jump_displacement", "load_scenario", "make_spec", "monte_carlo",
    "parse", "residual_report", "sample_box", "simulate_path", "solve_control",
]
