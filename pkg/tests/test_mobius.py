import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import sphere_points
from funkslice.fields import GaussianSum
from funkslice.geometry import CentralPlane, DomainError, SectionGrid, plane_distance, random_frame, sphere_section_nodes
from funkslice.mobius import (
    CenterContext,
    InvalidPlaneError,
    PoleError,
    central_plane_image_residual,
    central_to_parallel,
    involution_W,
    kelvin,
    measure_change_residual,
    mobius,
    multiplier_M,
    multiplier_M_inverse,
    parallel_to_central,
    parity_parts,
    reflect_hyperplane,
    reflect_through_center,
    symmetrize_W,
    weight_rho,
    weight_rho_mobius,
)

seeds = st.integers(0, 2**31)
norms = st.floats(1.05, 8.0)


def exterior_ctx(seed, norm, dim=3, k=2):
    a = sphere_points(np.random.default_rng(seed), 1, dim)[0] * norm
    return CenterContext(a, k)


def valid_central_plane(ctx, rng):
    while True:
        xi = random_frame(ctx.a.size, ctx.a.size - ctx.k, rng)
        if np.sum((xi.T @ ctx.a) ** 2) < 1.0:
            return CentralPlane(xi, ctx.a)


def test_kelvin():
    assert np.allclose(kelvin([0.0, 0.0, 2.0]), [0, 0, 0.5])
    with pytest.raises(DomainError):
        kelvin([0.0, 0.0])


@given(seeds, st.floats(0.01, 0.95), st.sampled_from([2, 3, 4]))
@settings(max_examples=60, deadline=None)
def test_mobius_swaps_and_involutes(seed, r, dim):
    rng = np.random.default_rng(seed)
    a = r * sphere_points(rng, 1, dim)[0]
    x = 0.99 * sphere_points(rng, 50, dim) * rng.uniform(0, 1, (50, 1))
    assert np.allclose(mobius(a, np.zeros(dim)), a, atol=1e-14)
    assert np.allclose(mobius(a, a), 0.0, atol=1e-14)
    assert np.allclose(mobius(a, mobius(a, x)), x, atol=1e-12)
    on_sphere = sphere_points(rng, 50, dim)
    assert np.allclose(np.linalg.norm(mobius(a, on_sphere), axis=1), 1.0, atol=1e-12)


def test_mobius_domain_errors():
    with pytest.raises(DomainError):
        mobius([1.0, 0.0], [0.0, 0.0])
    with pytest.raises(PoleError):
        mobius([0.5, 0.0], [2.0, 0.0])
    assert np.allclose(mobius([0.0, 0.0], [0.3, 0.1]), [-0.3, -0.1])


def test_center_context_validation():
    with pytest.raises(DomainError):
        CenterContext(np.array([np.nan, 0.0, 2.0]))
    with pytest.raises(DomainError):
        CenterContext(np.array([0.0, 0.0, 2.0]), k=3)
    ctx0 = CenterContext(np.zeros(3))
    assert ctx0.a_star is None and not ctx0.exterior
    with pytest.raises(DomainError):
        ctx0.phi(np.zeros(3))
    ctx = CenterContext(np.array([0.0, 0.0, 2.0]))
    assert ctx.s_a_star == pytest.approx(np.sqrt(0.75))
    assert ctx.with_k(2).k == 2
    with pytest.raises(DomainError):
        CenterContext(np.array([0.0, 0.0, 0.5])).s_a_star


@given(seeds, norms)
@settings(max_examples=50, deadline=None)
def test_reflect_through_center_properties(seed, norm):
    ctx = exterior_ctx(seed, norm)
    x = sphere_points(np.random.default_rng(seed + 1), 100, 3)
    y = reflect_through_center(ctx, x)
    assert np.allclose(np.linalg.norm(y, axis=1), 1.0, atol=1e-12)
    assert np.allclose(reflect_through_center(ctx, y), x, atol=1e-10)
    # a, x, y collinear
    cross = np.cross(x - ctx.a, y - ctx.a)
    assert np.max(np.abs(cross)) < 1e-10 * norm**2


@given(seeds, norms, st.sampled_from([(3, 2), (4, 2), (4, 3)]))
@settings(max_examples=50, deadline=None)
def test_conjugation_and_rho(seed, norm, dk):
    dim, k = dk
    ctx = exterior_ctx(seed, norm, dim, k)
    x = sphere_points(np.random.default_rng(seed + 2), 100, dim)
    lhs = reflect_through_center(ctx, x)
    rhs = ctx.phi(reflect_hyperplane(ctx.a, ctx.phi(x)))
    assert np.max(np.abs(lhs - rhs)) < 1e-11
    prod = weight_rho(ctx, x) * weight_rho(ctx, lhs)
    assert np.max(np.abs(prod - 1.0)) < 1e-10
    assert np.allclose(weight_rho(ctx, x), weight_rho_mobius(ctx, x), rtol=1e-10)


@given(seeds, norms)
@settings(max_examples=30, deadline=None)
def test_w_is_an_involution(seed, norm):
    rng = np.random.default_rng(seed)
    ctx = exterior_ctx(seed, norm)
    f = GaussianSum.random(3, 3, rng)
    x = sphere_points(rng, 200, 3)
    WW = involution_W(ctx, involution_W(ctx, f))
    assert np.max(np.abs(WW(x) - f(x))) < 1e-11
    even, odd = symmetrize_W(ctx, f, 1), symmetrize_W(ctx, f, -1)
    assert np.allclose(even(x) + odd(x), f(x))
    assert np.allclose(involution_W(ctx, even)(x), even(x), atol=1e-12)
    assert np.allclose(involution_W(ctx, odd)(x), -odd(x), atol=1e-12)
    with pytest.raises(DomainError):
        symmetrize_W(ctx, f, 0)


def test_parity_parts():
    a = np.array([0.3, 0.0, 1.0])
    f = GaussianSum.random(3, 3, np.random.default_rng(4))
    plus, minus = parity_parts(a, f)
    x = sphere_points(np.random.default_rng(5), 50, 3)
    rx = reflect_hyperplane(a, x)
    assert np.allclose(plus(x), plus(rx))
    assert np.allclose(minus(x), -minus(rx))
    assert np.allclose(plus(x) + minus(x), f(x))


@given(seeds, norms)
@settings(max_examples=30, deadline=None)
def test_multiplier_inverse(seed, norm):
    rng = np.random.default_rng(seed)
    ctx = exterior_ctx(seed, norm)
    f = GaussianSum.random(3, 3, rng)
    x = sphere_points(rng, 100, 3)
    back = multiplier_M_inverse(ctx, multiplier_M(ctx, f))
    assert np.allclose(back(x), f(x), atol=1e-12)


@given(seeds, st.sampled_from([1.5, 2.0, 5.0]), st.sampled_from([(3, 2), (4, 2), (4, 3)]))
@settings(max_examples=40, deadline=None)
def test_plane_bijection_round_trip(seed, norm, dk):
    dim, k = dk
    rng = np.random.default_rng(seed)
    ctx = exterior_ctx(seed, norm, dim, k)
    pl = valid_central_plane(ctx, rng)
    image = central_to_parallel(ctx, pl)
    assert np.max(np.abs(image.normal.T @ ctx.a)) < 1e-12
    nodes, _ = sphere_section_nodes(pl, SectionGrid(16))
    assert central_plane_image_residual(ctx, pl, nodes) < 1e-11
    assert plane_distance(parallel_to_central(ctx, image), pl) < 1e-11


def test_plane_bijection_rejects_missing_planes():
    ctx = CenterContext(np.array([0.0, 0.0, 2.0]))
    with pytest.raises(InvalidPlaneError):
        central_to_parallel(ctx, CentralPlane(np.array([[0.0], [0.0], [1.0]]), ctx.a))
    image = central_to_parallel(ctx, CentralPlane(np.array([[1.0], [0.0], [0.0]]), ctx.a))
    assert np.allclose(image.offset, 0.0)


def test_measure_change_identity():
    ctx = CenterContext(np.array([0.5, 0.0, 1.8]))
    f = GaussianSum.random(3, 4, np.random.default_rng(0))
    assert measure_change_residual(ctx, f) < 1e-8


def test_mobius_worked_example():
    got = mobius([0.5, 0.0, 0.0], [0.0, 1.0, 0.0])
    assert np.allclose(got, [0.5, -np.sqrt(0.75), 0.0], atol=1e-15)
    assert np.linalg.norm(got) == pytest.approx(1.0, abs=1e-15)
