import pytest

from manifold_control.errors import ConfigurationError, DimensionError
from manifold_control.expr import parse
from manifold_control.manifold import ManifoldLevel, ManifoldSpec, check_independence, grad_u, make_spec, numerical_rank


def test_make_spec_defaults_pick_independent_projections():
    spec = make_spec(3, 2, "x1^2 + x2^2 + x3", x0=(1.0, 1.0, 1.0))
    assert len(spec.f_funcs) == 1 and len(spec.h_funcs) == 2 and len(spec.phi_funcs) == 1
    assert [q.source for q in spec.q00] == ["1", "1"]
    report = check_independence(spec, [(0.0, (1.0, 1.0, 1.0)), (0.5, (0.3, -0.2, 2.0))])
    assert report.independent


def test_dependent_h_is_reported():
    spec = make_spec(2, 1, "x1 + x2", h=["x1 + x2"])
    report = check_independence(spec, [(0.0, (0.0, 0.0))])
    assert not report.h_independent
    assert report.points[0].h_rank == 1


def test_h_rows_for_paper_example(paper_spec):
    assert paper_spec.h_matrix_rows(0.0, (0.0, 1.0)) == [[0.0, 1.0, 0.0]]
    dt, g = grad_u(paper_spec, 0.0, (0.0, 1.0))
    assert dt == 0.0 and g.tolist() == [-2.0, 1.0]


def test_function_h_rows_carry_time_derivative():
    spec = make_spec(2, 0, "x2*exp(-2*x1)", h=["t*x1"])
    assert spec.h_matrix_rows(2.0, (3.0, 1.0)) == [[3.0, 2.0, 0.0]]


def test_validation():
    u = parse("x1*x2", 2)
    with pytest.raises(ConfigurationError):
        ManifoldSpec(2, 0, parse("t", 2), h_funcs=(parse("x1", 2),))
    with pytest.raises(DimensionError):
        ManifoldSpec(2, 1, u, h_funcs=(parse("x1", 2),))
    with pytest.raises(DimensionError):
        ManifoldSpec(2, 0, u)
    with pytest.raises(ConfigurationError):
        ManifoldSpec(2, 0, u, h_funcs=(parse("gamma", 2),))
    with pytest.raises(ConfigurationError):
        ManifoldSpec(2, 0, u, h_funcs=(parse("x1", 2),), h_rows=((parse("1", 2),) * 3,))
    with pytest.raises(DimensionError):
        ManifoldSpec(3, 0, parse("x1", 3), h_funcs=(parse("x2", 3), parse("x3", 3)))


def test_level_and_rank():
    with pytest.raises(ValueError):
        ManifoldLevel(float("nan"))
    assert numerical_rank([[1.0, 0.0], [0.0, 1e-12]]) == 1
    assert numerical_rank([[0.0, 0.0]]) == 0
