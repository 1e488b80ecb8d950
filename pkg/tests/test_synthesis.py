import math

import numpy as np
import pytest

from conftest import DERIVED_CORRECTION, PRINTED_CORRECTION, closed_form_g, u_example
from manifold_control.errors import ConfigurationError, DegeneratePointError
from manifold_control.manifold import make_spec
from manifold_control.verify import drift_residual
from manifold_control.synthesis import (
    SynthesizedSystem,
    diffusion_column,
    diffusion_matrix,
    drift,
    drift_vector_field,
    jump_displacement,
    jump_path,
)


def test_paper_example_at_initial_point(paper_spec):
    b = diffusion_matrix(paper_spec, 0.0, (0.0, 1.0))
    assert b.shape == (2, 1)
    assert b[:, 0].tolist() == [1.0, 2.0]
    assert np.allclose(drift(paper_spec, 0.0, (0.0, 1.0)), [-1.0, 0.0], atol=1e-9)
    g = jump_displacement(paper_spec, 0.0, (0.0, 1.0), 0.5)
    assert np.allclose(g, [0.5 * math.log(2.0), 1.0], atol=1e-9)


@pytest.mark.parametrize("x", [(-1.0, 0.1), (0.3, 2.0), (1.0, 3.0)])
def test_paper_example_closed_forms(paper_spec, x):
    x1, x2 = x
    e = math.exp(-2 * x1)
    assert np.allclose(diffusion_column(paper_spec, 1, 0.2, x), [e, 2 * x2 * e], rtol=1e-14)
    assert drift_vector_field(paper_spec, 0.2, x) == pytest.approx([0.0, 0.0], abs=1e-15)
    # A = (-q00^2 e^{-4 x1}, 0): the Ito correction of B alone
    assert np.allclose(drift(paper_spec, 0.2, x), [-e * e, 0.0], rtol=1e-7, atol=1e-9)


def test_q00_scales_diffusion_and_drift_quadratically():
    spec = make_spec(2, 1, "x2*exp(-2*x1)", h_rows=[["0", "1", "0"]], q00=["3"])
    assert diffusion_matrix(spec, 0.0, (0.0, 1.0))[:, 0].tolist() == [3.0, 6.0]
    assert np.allclose(drift(spec, 0.0, (0.0, 1.0)), [-9.0, 0.0], atol=1e-8)


def test_zero_gamma_is_identity(paper_spec):
    assert jump_displacement(paper_spec, 0.0, (0.4, 1.3), 0.0).tolist() == [0.0, 0.0]


def test_jump_path_matches_closed_form_including_negative_marks(paper_spec):
    x = (0.2, 1.5)
    gammas = [-0.4, -0.1, 0.0, 0.3, 1.0, 5.0]
    gs = jump_path(paper_spec, 0.0, x, gammas)
    for gm, g in zip(gammas, gs):
        assert np.allclose(g, closed_form_g(x, gm), atol=1e-8)
        assert abs(u_example(np.add(x, g)) - u_example(x)) < 1e-9


def test_system_wrapper(paper_spec):
    sys_ = SynthesizedSystem(paper_spec)
    a, b = sys_.drift_and_diffusion(0.0, (0.0, 1.0))
    assert np.allclose(a, sys_.drift(0.0, (0.0, 1.0)))
    assert np.array_equal(b, sys_.diffusion(0.0, (0.0, 1.0)))
    assert np.allclose(sys_.jump(0.0, (0.0, 1.0), 0.5), sys_.jump_path(0.0, (0.0, 1.0), [0.5])[0])


def test_three_dimensional_manifold_is_preserved():
    spec = make_spec(3, 2, "x1^2 + x2^2 + x3^2", h=["x1", "x2"], f=["x3"], phi=["x1 + x3"], q00=["1", "0.5"])
    x = (0.6, -0.3, 0.8)
    b = diffusion_matrix(spec, 0.0, x)
    grad = 2 * np.array(x)
    assert np.allclose(grad @ b, 0.0, atol=1e-14)
    g = jump_displacement(spec, 0.0, x, 0.7)
    assert abs(np.sum((np.array(x) + g) ** 2) - np.sum(np.square(x))) < 1e-9
    assert np.linalg.norm(g) > 0.1


def test_degenerate_points():
    spec = make_spec(2, 1, "x1^2 + x2^2", h_rows=[["0", "1", "0"]])
    with pytest.raises(DegeneratePointError):
        diffusion_matrix(spec, 0.0, (0.0, 0.0))
    flat = make_spec(2, 0, "x1 + t", h_rows=[["1", "1", "0"]])
    with pytest.raises(DegeneratePointError):
        drift_vector_field(flat, 0.0, (0.0, 0.0))


def test_vanishing_q00_is_a_configuration_error():
    spec = make_spec(2, 1, "x2*exp(-2*x1)", h_rows=[["0", "1", "0"]], q00=["x1"])
    with pytest.raises(ConfigurationError):
        diffusion_matrix(spec, 0.0, (0.0, 1.0))


def test_no_wiener_channels():
    spec = make_spec(2, 0, "x2*exp(-2*x1)", h_rows=[["1", "1", "0"]])
    assert diffusion_matrix(spec, 0.0, (0.0, 1.0)).shape == (2, 0)
    assert np.allclose(drift(spec, 0.0, (0.0, 1.0)), [-1.0, -2.0])


def test_derived_drift_constant_is_the_consistent_one(paper_system):
    t, x = 0.3, (0.4, 1.7)
    e4 = math.exp(-4 * x[0])
    assert drift(paper_system.spec, t, x)[0] == pytest.approx(DERIVED_CORRECTION * e4, rel=1e-7)

    class WithA:
        spec = paper_system.spec
        diffusion = staticmethod(paper_system.diffusion)

        def __init__(self, c):
            self.c = c

        def drift(self, t, x):
            return np.array([self.c * math.exp(-4 * x[0]), 0.0])

    assert drift_residual(WithA(DERIVED_CORRECTION), t, x) < 1e-8
    assert drift_residual(WithA(PRINTED_CORRECTION), t, x) > 0.1
