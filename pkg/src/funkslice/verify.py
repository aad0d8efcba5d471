"""Numerical certification of the structural identities behind the transforms."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .fields import GaussianSum, symmetrized
from .geometry import (
    CentralPlane,
    SectionGrid,
    det_identity_check,
    DomainError,
    plane_distance,
    random_frame,
    sphere_section_nodes,
    sphere_quadrature,
)
from .mobius import (
    CenterContext,
    central_to_parallel,
    involution_W,
    measure_change_sides,
    mobius,
    multiplier_M,
    parallel_to_central,
    reflect_hyperplane,
    reflect_through_center,
    weight_rho,
)
from .transforms import (
    PlaneLattice,
    dimension_link_lhs,
    dimension_link_rhs,
    funk_transform,
    parallel_slice_transform,
    profile_sweep,
    radon_john_batch,
    slice_density,
    slice_plane_in_perp,
)

DEFAULT_TOLERANCES = {
    "mobius_identities": 1e-13,
    "plane_bijection": 1e-11,
    "conjugation": 1e-11,
    "w_involution": 1e-11,
    "rho_product": 1e-12,
    "factorization": 1e-6,
    "measure_change": 1e-6,
    "det_identity": 1e-12,
    "kernel_w_odd": 5e-7,
    "kernel_parity_odd": 5e-7,
    "slice_reduction": 1e-6,
    "dimension_link": 1e-3,
}


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    runtime: float
    detail: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}


def perturbed_mobius(a, eps: float):
    """``phi_a`` with ``eps`` added to the coefficient ``s_a``; a deliberate defect for sensitivity tests."""
    a = np.asarray(a, dtype=float)
    aa = float(a @ a)
    s = np.sqrt(1.0 - aa) + eps

    def phi(x):
        x = np.asarray(x, dtype=float)
        xa = x @ a
        along = (xa / aa)[..., None] * a
        return (a - along - s * (x - along)) / (1.0 - xa)[..., None]

    return phi


def _sphere_points(rng, count, dim):
    x = rng.standard_normal((count, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _ball_points(rng, count, dim, radius=1.0):
    x = _sphere_points(rng, count, dim)
    return x * (radius * rng.uniform(0, 1, count) ** (1.0 / dim))[:, None]


# --------------------------------------------------------------------------
# individual checks; each returns (residual, detail)
# --------------------------------------------------------------------------


def check_mobius_identities(ctx, rng, samples=10_000):
    dim = ctx.a.size
    b = ctx.a_star
    worst = 0.0
    for p in (b, rng.uniform(0.1, 0.9) * _sphere_points(rng, 1, dim)[0]):
        s2 = 1.0 - p @ p
        x = _ball_points(rng, samples, dim)
        y = mobius(p, x)
        lhs = 1.0 - np.sum(y * y, axis=1)
        rhs = s2 * (1.0 - np.sum(x * x, axis=1)) / (1.0 - x @ p) ** 2
        worst = max(
            worst,
            float(np.max(np.abs(lhs - rhs))),
            float(np.max(np.abs(mobius(p, np.zeros(dim)) - p))),
            float(np.max(np.abs(mobius(p, p)))),
            float(np.max(np.abs(mobius(p, y) - x))),
        )
    return worst, {"samples": samples}


def check_plane_bijection(ctx, rng, planes=200, points=20):
    worst_img = worst_trip = 0.0
    for pl in PlaneLattice("central-random", count=planes, seed=int(rng.integers(2**31))).planes(ctx):
        image = central_to_parallel(ctx, pl)
        nodes, _ = sphere_section_nodes(pl, SectionGrid(points))
        worst_img = max(worst_img, float(np.max(np.abs(image.residual(ctx.phi(nodes))))))
        worst_trip = max(worst_trip, plane_distance(parallel_to_central(ctx, image), pl))
    return max(worst_img, worst_trip), {"image": worst_img, "round_trip": worst_trip, "planes": planes}


def check_conjugation(ctx, rng, samples=10_000):
    x = _sphere_points(rng, samples, ctx.a.size)
    lhs = reflect_through_center(ctx, x)
    rhs = ctx.phi(reflect_hyperplane(ctx.a, ctx.phi(x)))
    return float(np.max(np.abs(lhs - rhs))), {"samples": samples}


def check_w_involution(ctx, rng, f, samples=10_000):
    x = _sphere_points(rng, samples, ctx.a.size)
    WWf = involution_W(ctx, involution_W(ctx, f))
    return float(np.max(np.abs(WWf(x) - f(x)))), {"samples": samples}


def check_rho_product(ctx, rng, samples=10_000):
    x = _sphere_points(rng, samples, ctx.a.size)
    prod = weight_rho(ctx, x) * weight_rho(ctx, reflect_through_center(ctx, x))
    return float(np.max(np.abs(prod - 1.0))), {"samples": samples}


def check_factorization(ctx, rng, f, planes=200, size=512, automorphism=None):
    grid = SectionGrid(size)
    Mf = multiplier_M(ctx, f, automorphism)
    worst = 0.0
    for pl in PlaneLattice("central-random", count=planes, seed=int(rng.integers(2**31))).planes(ctx):
        lhs = funk_transform(ctx, f, pl, grid)
        rhs = parallel_slice_transform(ctx, Mf, central_to_parallel(ctx, pl), grid)
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
    return worst, {"planes": planes, "section_size": size}


def check_measure_change(ctx, rng, phantoms, size=144):
    worst = 0.0
    for f in phantoms:
        lhs, rhs = measure_change_sides(ctx, f, size)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    nodes, _ = sphere_quadrature(ctx.n, size)
    return worst, {"phantoms": len(phantoms), "nodes": len(nodes)}


def check_det_identity(ctx, rng, trials=100):
    worst = 0.0
    for _ in range(trials):
        A = rng.standard_normal((4, 2))
        B = rng.standard_normal((2, 4))
        worst = max(worst, det_identity_check(A, B) / max(1.0, abs(np.linalg.det(np.eye(2) + B @ A))))
    return worst, {"trials": trials}


def check_kernel_w_odd(ctx, rng, f, planes=200):
    fo = symmetrized(f, "W-odd", ctx.a, ctx.k)
    prof = profile_sweep(ctx, fo, PlaneLattice("central-random", count=planes, seed=int(rng.integers(2**31))), "F")
    return float(np.max(np.abs(prof.values))), {"planes": planes}


def check_kernel_parity_odd(ctx, rng, f, planes=200):
    fo = symmetrized(f, "a-perp-odd", ctx.a, ctx.k)
    prof = profile_sweep(ctx, fo, PlaneLattice("parallel-random", count=planes, seed=int(rng.integers(2**31))), "Pi")
    return float(np.max(np.abs(prof.values))), {"planes": planes}


def check_slice_reduction(ctx, rng, f, n_angle=64, n_offset=64):
    if ctx.n == 2 and ctx.k == 2:
        lattice = PlaneLattice("parallel-grid", n_angle, n_offset)
    else:
        lattice = PlaneLattice("parallel-random", count=n_angle * n_offset // 16, seed=int(rng.integers(2**31)))
    lhs = profile_sweep(ctx, f, lattice, "Pi").values.ravel()
    cut = [slice_plane_in_perp(ctx, pl) for pl in lattice.planes(ctx)]
    base = np.stack([c.base for c in cut])
    shift = np.stack([c.shift for c in cut])
    dist2 = np.sum(shift * shift, axis=1)
    rhs = np.sqrt(np.clip(1.0 - dist2, 0.0, None)) * radon_john_batch(slice_density(ctx, f), base, shift)
    return float(np.max(np.abs(lhs - rhs))), {"lattice": lattice.to_dict()}


def check_dimension_link(ctx, rng, f, ell, frames=20, samples=10_000):
    """Returns the worst ratio ``|lhs - rhs| / max(tol, 3 sigma)`` (pass iff <= 1)."""
    dim = ctx.a.size
    rows = []
    worst = 0.0
    for _ in range(frames):
        while True:
            eta = random_frame(dim, dim - ell, rng)
            if np.sum((eta.T @ ctx.a) ** 2) < 1.0:
                break
        lhs = dimension_link_lhs(ctx.a, f, eta)
        est = dimension_link_rhs(ctx, f, eta, ctx.k, samples, rng)
        allowed = max(DEFAULT_TOLERANCES["dimension_link"], 3.0 * est.stderr)
        worst = max(worst, abs(lhs - est.mean) / allowed)
        rows.append({"lhs": lhs, "rhs": est.mean, "stderr": est.stderr, "valid_fraction": est.valid_fraction})
    return worst, {"measure": "max |lhs - rhs| / max(1e-3, 3 stderr)", "frames": rows}


# --------------------------------------------------------------------------
# suite
# --------------------------------------------------------------------------


def verification_phantom(dim: int, rng) -> GaussianSum:
    """Smooth test field with large gradients, so that 1e-6 defects in the maps are visible."""
    return GaussianSum.random(dim, 8, rng, width=(0.25, 0.4), amplitude=4.0)


def run_suite(
    a,
    k: int = 2,
    seed: int = 0,
    ell: int | None = None,
    tolerances: dict | None = None,
    mutation: float | None = None,
    checks: list | None = None,
    sizes: dict | None = None,
) -> VerificationReport:
    """Run the identity suite; ``mutation`` perturbs ``phi_{a*}`` in the factorization check."""
    tol = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
    sizes = sizes or {}
    ctx = CenterContext(np.asarray(a, dtype=float), k)
    ctx.require_exterior()
    rng = np.random.default_rng(seed)
    dim = ctx.a.size
    f = verification_phantom(dim, rng)
    phantoms = [f, GaussianSum.random(dim, 3, rng), lambda x: np.exp(x[..., 0]) * np.cos(2.0 * x[..., -1])]
    auto = perturbed_mobius(ctx.a_star, mutation) if mutation else None

    table = {
        "mobius_identities": lambda r: check_mobius_identities(ctx, r, sizes.get("samples", 10_000)),
        "plane_bijection": lambda r: check_plane_bijection(ctx, r, sizes.get("planes", 200)),
        "conjugation": lambda r: check_conjugation(ctx, r, sizes.get("samples", 10_000)),
        "w_involution": lambda r: check_w_involution(ctx, r, f, sizes.get("samples", 10_000)),
        "rho_product": lambda r: check_rho_product(ctx, r, sizes.get("samples", 10_000)),
        "factorization": lambda r: check_factorization(ctx, r, f, sizes.get("planes", 200), 512, auto),
        "measure_change": lambda r: check_measure_change(ctx, r, phantoms),
        "det_identity": lambda r: check_det_identity(ctx, r),
        "kernel_w_odd": lambda r: check_kernel_w_odd(ctx, r, f, sizes.get("planes", 200)),
        "kernel_parity_odd": lambda r: check_kernel_parity_odd(ctx, r, f, sizes.get("planes", 200)),
        "slice_reduction": lambda r: check_slice_reduction(ctx, r, f, sizes.get("lattice", 64), sizes.get("lattice", 64)),
    }
    if ell is not None:
        table["dimension_link"] = lambda r: check_dimension_link(
            ctx, r, f, ell, sizes.get("frames", 20), sizes.get("mc_samples", 10_000)
        )
    names = checks or list(table)
    unknown = [nm for nm in names if nm not in table]
    if unknown:
        raise DomainError(f"unknown or unavailable checks: {unknown}")
    results = []
    for name in names:
        sub = np.random.default_rng([seed, names.index(name)])
        t0 = time.perf_counter()
        resid, detail = table[name](sub)
        elapsed = time.perf_counter() - t0
        limit = 1.0 if name == "dimension_link" else tol[name]
        results.append(CheckResult(name, float(resid), float(limit), bool(resid <= limit), elapsed, detail))
    return VerificationReport(results)
