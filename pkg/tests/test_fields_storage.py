import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import sphere_points
from funkslice.fields import (
    SYMMETRIES,
    BallPhantom,
    GaussianSum,
    GridField,
    PhantomSpec,
    relative_l2_error,
    symmetrized,
    symmetry_residual,
)
from funkslice.geometry import DomainError
from funkslice.storage import StorageError, read_table, write_table

A = [0.2, -0.4, 1.7]


def test_gaussian_sum_evaluates_and_round_trips():
    g = GaussianSum([[0.0, 0.0, 1.0]], [0.5], [2.0])
    assert g(np.array([0.0, 0.0, 1.0])) == pytest.approx(2.0)
    assert g(np.array([0.0, 0.0, 0.5])) == pytest.approx(2.0 * np.exp(-1.0))
    back = GaussianSum.from_dict(g.to_dict())
    assert np.array_equal(back.centers, g.centers) and back.dim == 3
    with pytest.raises(DomainError):
        GaussianSum([[0.0, 0.0, 1.0]], [0.0], [1.0])
    with pytest.raises(DomainError):
        GaussianSum([[0.0, 0.0, 1.0]], [1.0, 2.0], [1.0])
    with pytest.raises(DomainError):
        GaussianSum.from_dict({"kind": "other"})


@pytest.mark.parametrize("symmetry", SYMMETRIES)
def test_symmetry_classes(symmetry):
    f = symmetrized(GaussianSum.random(3, 4, np.random.default_rng(0)), symmetry, np.array(A), 2)
    x = sphere_points(np.random.default_rng(1), 200, 3)
    assert symmetry_residual(f, symmetry, x, np.array(A), 2) < 1e-12


def test_symmetry_errors():
    f = GaussianSum.random(3, 2, np.random.default_rng(0))
    with pytest.raises(DomainError):
        symmetrized(f, "bogus", A)
    with pytest.raises(DomainError):
        symmetrized(f, "a-perp-even")
    with pytest.raises(DomainError):
        symmetrized(f, "W-even", [0.0, 0.0, 0.5])


def test_phantom_spec_round_trip():
    spec = PhantomSpec.from_dict({"dim": 3, "count": 3, "seed": 4, "symmetry": "W-even", "a": A})
    again = PhantomSpec.from_dict(spec.to_dict())
    x = sphere_points(np.random.default_rng(2), 20, 3)
    assert np.array_equal(spec.build()(x), again.build()(x))
    with pytest.raises(DomainError):
        PhantomSpec.from_dict({"dim": 3, "symmetry": "odd"})


@pytest.mark.parametrize("kind", ["unit", "dome", "bump", "gaussian-sum"])
def test_ball_phantoms(kind):
    ph = BallPhantom.from_dict({"kind": kind, "dim": 2, "seed": 1})
    y = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 0.0], [2.0, 0.0]])
    v = ph(y)
    assert v[2] == 0.0 and v[3] == 0.0
    assert ph.radial == (kind != "gaussian-sum")
    assert np.array_equal(BallPhantom.from_dict(ph.to_dict())(y), v)
    with pytest.raises(DomainError):
        BallPhantom("cone")


def test_grid_field_reproduces_nodes_and_interpolates():
    f = lambda x: x[..., 0] + 0.5 * x[..., 2] ** 2
    field = GridField.from_function(f, 64, 128)
    pts, w = field.points()
    assert np.allclose(field(pts), field.values, atol=1e-12)
    rnd = sphere_points(np.random.default_rng(3), 500, 3)
    assert np.max(np.abs(field(rnd) - f(rnd))) < 2e-3
    # across the poles
    assert field(np.array([0.0, 0.0, 1.0])) == pytest.approx(0.5, abs=2e-3)
    with pytest.raises(DomainError):
        GridField(np.zeros((4, 5)))


def test_grid_field_save_load(tmp_path):
    field = GridField.from_function(lambda x: np.sin(3 * x[..., 1]), 8, 16, {"note": "x"})
    field.save(tmp_path / "f.csv")
    back = GridField.load(tmp_path / "f.csv")
    assert np.array_equal(back.values, field.values) and back.meta == {"note": "x"}


def test_relative_l2_error():
    assert relative_l2_error([1.0, 2.0], [1.0, 2.0], [1.0, 1.0]) == 0.0
    assert relative_l2_error([2.0], [1.0], [3.0]) == pytest.approx(1.0)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30))
@settings(max_examples=50, deadline=None)
def test_table_round_trip_is_bit_exact(tmp_path_factory, vals):
    path = tmp_path_factory.mktemp("t") / "t.csv"
    write_table(path, {"kind": "x"}, {"row_index": np.arange(len(vals)), "value": np.array(vals)})
    header, cols = read_table(path)
    assert header == {"kind": "x", "format_version": 1}
    assert cols["row_index"].dtype.kind == "i"
    assert np.array_equal(cols["value"], np.array(vals))


def test_table_errors(tmp_path):
    with pytest.raises(StorageError):
        read_table(tmp_path / "missing.csv")
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(StorageError):
        read_table(tmp_path / "bad.csv")
    (tmp_path / "bad2.csv").write_text("# {oops\na\n1\n")
    with pytest.raises(StorageError):
        read_table(tmp_path / "bad2.csv")
    with pytest.raises(ValueError):
        write_table(tmp_path / "x.csv", {}, {"a": [1], "b": [1, 2]})
    with pytest.raises(DomainError):
        GridField.load(_write(tmp_path / "k.csv"))


def _write(path):
    write_table(path, {"kind": "points"}, {"value": [1.0]})
    return path
