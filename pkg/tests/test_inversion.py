import warnings

import numpy as np
import pytest

from conftest import sphere_points
from funkslice.fields import GaussianSum, symmetrized
from funkslice.fractional import AccuracyWarning
from funkslice.geometry import DomainError
from funkslice.inversion import (
    InversionSettings,
    LineData,
    OffsetData,
    ReconstructionAccuracyError,
    dual_mean,
    funk_invert,
    funk_invert_points,
    line_data_from_profile,
    radial_breaks,
    radon_invert,
    slice_invert,
    slice_invert_points,
)
from funkslice.mobius import CenterContext
from funkslice.transforms import PlaneLattice, chebyshev_offsets, profile_sweep, uniform_angles


def dome_data(normals, offsets):
    return np.where(np.abs(offsets) < 1, np.pi * (1 - offsets**2) / 2, 0.0)


def unit_data(normals, offsets):
    return np.where(np.abs(offsets) < 1, 2 * np.sqrt(np.clip(1 - offsets**2, 0, None)), 0.0)


def test_radial_breaks():
    b = radial_breaks(0.1, 1.9)
    assert b[:2] == [0.0, 0.1] and b[-1] == 1.9
    assert np.all(np.diff(b) > 0)
    assert b[2] == pytest.approx(0.5)


def test_dual_mean_at_origin_is_data_at_offset():
    t = np.array([0.0, 0.3, 0.7, 1.5])
    got = dual_mean(dome_data, np.zeros(2), t)
    assert np.allclose(got, dome_data(None, t), atol=1e-14)


def test_dual_mean_of_offset_independent_data():
    # constant data inside the ball: mean is the fraction of directions whose plane meets the ball
    const = lambda normals, offsets: np.where(np.abs(offsets) < 1, 1.0, 0.0)
    x = np.array([0.5, 0.0])
    got = dual_mean(const, x, np.array([0.2]))
    # planes {y : w.y = w.x + t} meet the disc iff |0.5 cos g + 0.2| < 1, always true here
    assert got[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("data,truth", [(unit_data, lambda r: 1.0), (dome_data, lambda r: np.sqrt(1 - r * r))])
def test_radon_invert_disc_closed_forms(data, truth):
    pts = np.array([[0.0, 0.0], [0.3, -0.2], [0.0, 0.7], [-0.6, 0.6]])
    got = radon_invert(data, pts, 1)
    want = [truth(np.linalg.norm(p)) for p in pts]
    assert np.allclose(got, want, atol=1e-4)
    assert radon_invert(data, pts[1], 1) == pytest.approx(got[1])


def test_radon_invert_ball_via_offset_data():
    # unit ball indicator in R^3: plane integral pi (1 - p^2)
    p = chebyshev_offsets(24)
    data = OffsetData(p, np.pi * (1 - p**2))
    got = radon_invert(data, np.array([[0.0, 0.0, 0.0], [0.2, 0.3, -0.1]]), 2)
    assert np.allclose(got, 1.0, atol=1e-4)


def test_radon_invert_d1_in_r3_product_rule():
    # lines in R^3: line integral of the ball indicator is 2 sqrt(1 - |u|^2)
    def lines(base, shift):
        return 2 * np.sqrt(np.clip(1 - np.sum(shift * shift, axis=-1), 0, None))

    got = radon_invert(lines, np.array([0.1, 0.0, 0.2]), 1, InversionSettings(angular=16))
    assert got == pytest.approx(1.0, abs=2e-2)


def test_radon_invert_rejects_outside_points():
    with pytest.raises(DomainError):
        radon_invert(unit_data, np.array([1.0, 0.0]), 1)
    with pytest.raises(DomainError):
        dual_mean(unit_data, np.zeros(2), [0.1], d=2)


def test_radon_invert_strict_fit_check():
    noisy = lambda n, o: unit_data(n, o) * (1 + 0.05 * np.sin(400 * o))
    tight = InversionSettings(max_fit_residual=1e-12)
    with pytest.raises(ReconstructionAccuracyError):
        radon_invert(noisy, np.array([0.2, 0.1]), 1, tight, strict=True)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        radon_invert(noisy, np.array([0.2, 0.1]), 1, tight)
    assert any(issubclass(w.category, AccuracyWarning) for w in rec)


def test_line_data_interpolation():
    psi = uniform_angles(48)
    p = chebyshev_offsets(48)
    f = lambda ang, off: (1 - off**2) * (1 + 0.3 * np.cos(ang) * off)
    data = LineData(f(psi[:, None], p[None, :]))
    rng = np.random.default_rng(0)
    ang = rng.uniform(0, 2 * np.pi, 200)
    off = rng.uniform(-0.99, 0.99, 200)
    nrm = np.column_stack([np.cos(ang), np.sin(ang)])
    assert np.max(np.abs(data(nrm, off) - f(ang, off))) < 1e-5
    assert data(nrm[:1], np.array([1.2]))[0] == 0.0
    with pytest.raises(DomainError):
        LineData(np.ones((3, 3)))
    with pytest.raises(DomainError):
        LineData(np.full((5, 5), np.nan))


def test_line_data_from_profile_validates_kind():
    ctx = CenterContext(np.array([0.0, 0.0, 2.0]))
    prof = profile_sweep(ctx, lambda x: x[..., 0] ** 2, PlaneLattice("parallel-grid", 4, 4), "Pi")
    with pytest.raises(DomainError):
        line_data_from_profile(prof)


@pytest.fixture(scope="module")
def slice_setup():
    ctx = CenterContext(np.array([0.3, 0.2, 0.9]), 2)
    f = GaussianSum.random(3, 4, np.random.default_rng(1))
    prof = profile_sweep(ctx, f, PlaneLattice("parallel-grid", 48, 48), "Pi")
    return ctx, f, prof


def test_slice_invert_recovers_even_part(slice_setup):
    ctx, f, prof = slice_setup
    x = sphere_points(np.random.default_rng(2), 12, 3)
    target = symmetrized(f, "a-perp-even", ctx.a)
    res = slice_invert_points(ctx, prof, x)
    assert np.max(np.abs(res.values - target(x))) < 1e-4
    assert slice_invert(ctx, prof, x[0]) == pytest.approx(res.values[0])
    threaded = slice_invert_points(ctx, prof, x, threads=2)
    assert np.array_equal(threaded.values, res.values)


def test_slice_invert_equator_and_profile_checks(slice_setup):
    ctx, f, prof = slice_setup
    eq = np.cross(ctx.a, [1.0, 0.0, 0.0])
    eq /= np.linalg.norm(eq)
    res = slice_invert_points(ctx, prof, eq[None])
    assert res.equator[0] and res.values[0] == 0.0
    with pytest.raises(DomainError):
        slice_invert_points(CenterContext(-ctx.a), prof, eq[None])
    with pytest.raises(DomainError):
        funk_invert_points(ctx, prof, eq[None])


def test_funk_invert_small_grid():
    ctx = CenterContext(np.array([0.0, 0.0, 2.0]), 2)
    f = symmetrized(GaussianSum.random(3, 4, np.random.default_rng(3)), "W-even", ctx.a, 2)
    prof = profile_sweep(ctx, f, PlaneLattice("pullback-grid", 32, 32), "F")
    rec = funk_invert(ctx, prof, 6, 12)
    pts, w = rec.points()
    err = np.sqrt(np.sum(w * (rec.values - f(pts)) ** 2) / np.sum(w * f(pts) ** 2))
    assert err < 1e-3
    assert rec.meta["source"] == "funk_invert"
    with pytest.raises(DomainError):
        funk_invert_points(CenterContext(np.array([0.0, 0.0, 3.0])), prof, pts.reshape(-1, 3)[:1])
