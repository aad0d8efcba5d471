"""Forward transforms: shifted Funk, parallel slice, Radon-John, and their sweeps over plane lattices."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .geometry import (
    CentralPlane,
    DomainError,
    EmptySectionError,
    EuclideanPlane,
    FRAME_TOL,
    GeometryError,
    ParallelPlane,
    SectionGrid,
    check_frame,
    complete_frame,
    random_frame,
    random_frame_in,
    sphere_area,
    sphere_quadrature,
    sphere_section_nodes,
)
from .mobius import CenterContext, parallel_to_central, parity_parts
from .storage import read_table, write_table

log = logging.getLogger(__name__)


def _eval_on(f, nodes) -> np.ndarray:
    vals = np.asarray(f(nodes), dtype=float)
    if vals.shape != nodes.shape[:-1]:
        raise DomainError(f"field returned shape {vals.shape}, expected {nodes.shape[:-1]}")
    if not np.all(np.isfinite(vals)):
        raise DomainError("field returned non-finite values on the section")
    return vals


def _section_integral(f, plane, grid, basis=None) -> float:
    if plane.distance >= 1.0:
        return 0.0
    nodes, w = sphere_section_nodes(plane, grid, basis)
    return float(w @ _eval_on(f, nodes))


def funk_transform(ctx: CenterContext, f, plane: CentralPlane, grid: SectionGrid | None = None, basis=None) -> float:
    """Integral of ``f`` over ``S^n`` cut by a k-plane through ``ctx.a``; zero if the plane misses the ball."""
    if plane.dim != ctx.k or plane.ambient_dim != ctx.a.size:
        raise DomainError("plane dimensions do not match the context")
    if np.max(np.abs(plane.residual(ctx.a))) > 1e-10 * max(1.0, ctx.norm):
        raise DomainError("plane does not pass through the center")
    return _section_integral(f, plane, grid, basis)


def parallel_slice_transform(ctx: CenterContext, f, plane: ParallelPlane, grid: SectionGrid | None = None) -> float:
    """Integral of ``f`` over ``S^n`` cut by a k-plane parallel to ``ctx.a``; zero if the plane misses the ball."""
    if plane.dim != ctx.k or plane.ambient_dim != ctx.a.size:
        raise DomainError("plane dimensions do not match the context")
    if ctx.a_hat is None or np.max(np.abs(plane.normal.T @ ctx.a_hat)) > FRAME_TOL:
        raise DomainError("plane is not parallel to a")
    return _section_integral(f, plane, grid)


# --------------------------------------------------------------------------
# Radon-John transform on the unit ball of R^m
# --------------------------------------------------------------------------

RADON_SIZE = 64


def _ball_rule(d: int, size: int):
    # rho = r sin(theta) on [0, pi/2]: d rho = r cos(theta) d theta
    x, w = np.polynomial.legendre.leggauss(size)
    theta = 0.25 * np.pi * (1.0 + x)
    w = 0.25 * np.pi * w
    om, wo = sphere_quadrature(d - 1, 2 * size if d == 2 else size)
    return np.sin(theta), np.cos(theta) * np.sin(theta) ** (d - 1) * w, om, wo


def radon_john_batch(phi, base, shift, size: int = RADON_SIZE) -> np.ndarray:
    """Radon-John integrals for planes ``shift + span(base)``; ``base`` is ``(..., m, d)``."""
    base = np.asarray(base, dtype=float)
    shift = np.asarray(shift, dtype=float)
    d = base.shape[-1]
    r2 = 1.0 - np.sum(shift * shift, axis=-1)
    live = r2 > 0
    r = np.sqrt(np.where(live, r2, 0.0))
    sin_t, w_t, om, wo = _ball_rule(d, size)
    dirs = np.einsum("...md,kd->...km", base, om)  # (..., K, m)
    pts = (
        shift[..., None, None, :]
        + (r[..., None, None] * sin_t[:, None])[..., None] * dirs[..., None, :, :]
    )  # (..., T, K, m)
    vals = np.asarray(phi(pts), dtype=float)
    out = np.einsum("...tk,t,k->...", vals, w_t, wo) * r**d
    return np.where(live, out, 0.0)


def radon_john(phi, plane: EuclideanPlane, size: int = RADON_SIZE) -> float:
    """Integral of ``phi`` (supported in the unit ball) over the d-plane ``plane``.

    A substitution ``rho = r sin(theta)`` in the radial variable of the plane's
    disc removes the ``(r^2 - rho^2)^{-1/2}`` boundary singularities met by
    the slice reduction.
    """
    return float(radon_john_batch(phi, plane.base, plane.shift, size))


# --------------------------------------------------------------------------
# reduction of the parallel slice transform to a^perp
# --------------------------------------------------------------------------


def perp_basis(ctx: CenterContext) -> np.ndarray:
    """Fixed orthonormal basis of ``a^perp``, shape ``(n+1, n)``."""
    if ctx.a_hat is None:
        raise DomainError("a^perp needs a nonzero a")
    return complete_frame(ctx.a_hat)


def slice_density(ctx: CenterContext, f, basis=None):
    """Density on the unit ball of ``a^perp`` whose Radon-John transform gives ``Pi_a f``.

    Points are given in coordinates of ``basis`` (default :func:`perp_basis`).
    Only the ``a^perp``-even part of ``f`` contributes.
    """
    E = perp_basis(ctx) if basis is None else check_frame(basis)
    a_hat = ctx.a_hat
    plus, _ = parity_parts(ctx.a, f)

    def phi(z):
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)
        inside = r2 < 1.0
        h = np.sqrt(np.where(inside, 1.0 - r2, 1.0))
        x = z @ E.T + h[..., None] * a_hat
        return np.where(inside, 2.0 * plus(x) / h, 0.0)

    return phi


def slice_plane_in_perp(ctx: CenterContext, plane: ParallelPlane, basis=None) -> EuclideanPlane:
    """``a^perp cap plane`` as a (k-1)-plane in coordinates of ``basis``."""
    E = perp_basis(ctx) if basis is None else check_frame(basis)
    return EuclideanPlane.from_normal(E.T @ plane.normal, plane.offset)


def slice_reduction_sides(ctx: CenterContext, f, plane: ParallelPlane, grid=None, size: int = RADON_SIZE):
    """``(Pi_a f(plane), sqrt(1 - |u|^2) * R phi(a^perp cap plane))``."""
    lhs = parallel_slice_transform(ctx, f, plane, grid)
    if plane.distance >= 1.0:
        return lhs, 0.0
    rhs = np.sqrt(1.0 - plane.distance**2) * radon_john(slice_density(ctx, f), slice_plane_in_perp(ctx, plane), size)
    return lhs, float(rhs)


# --------------------------------------------------------------------------
# normalized transform and the dimension link
# --------------------------------------------------------------------------


def funk_normalized(ctx: CenterContext, f, xi, grid: SectionGrid | None = None, rotation=None) -> float:
    """Mean of ``f`` over the section by the plane through ``a`` with normal frame ``xi``.

    ``rotation`` is an orthogonal matrix whose last columns equal ``xi``;
    its first ``k`` columns then parametrize the section.
    """
    xi = check_frame(xi)
    plane = CentralPlane(xi, ctx.a)
    if plane.distance >= 1.0:
        raise EmptySectionError("plane through a misses the open ball")
    basis = None
    if rotation is not None:
        rotation = check_frame(rotation)
        if rotation.shape != (xi.shape[0], xi.shape[0]) or np.max(np.abs(rotation[:, ctx.k:] - xi)) > 1e-12:
            raise DomainError("rotation must map the coordinate frame onto xi")
        basis = rotation[:, : ctx.k]
    total = funk_transform(ctx, f, plane, grid, basis)
    return total / (sphere_area(ctx.k - 1) * (1.0 - plane.distance**2) ** ((ctx.k - 1) / 2.0))


@dataclass
class LinkEstimate:
    """Monte Carlo estimate of the frame average of normalized k-sections."""

    mean: float
    stderr: float
    valid_fraction: float
    samples: int


def dimension_link_lhs(a, f, eta, grid: SectionGrid | None = None) -> float:
    """Normalized mean over the l-section with normal frame ``eta`` (l = n + 1 - frame size)."""
    eta = check_frame(eta)
    ell = eta.shape[0] - eta.shape[1]
    return funk_normalized(CenterContext(np.asarray(a, dtype=float), ell), f, eta, grid)


def dimension_link_rhs(
    ctx: CenterContext, f, eta, k: int | None = None, mc_samples: int = 10_000, rng=None, grid=None
) -> LinkEstimate:
    """Average of the normalized k-section means over frames ``[eta~, eta]``.

    ``eta~`` is Haar-distributed in ``St(eta^perp, l - k)``.  Frames whose
    plane misses the ball have an empty section; they are excluded and the
    kept fraction is reported.
    """
    eta = check_frame(eta)
    dim = eta.shape[0]
    n = dim - 1
    ell = dim - eta.shape[1]
    k = ctx.k if k is None else k
    if not 1 < k < ell <= n:
        raise DomainError(f"need 1 < k < l <= n, got k={k}, l={ell}, n={n}")
    ctx_k = ctx.with_k(k)
    rng = np.random.default_rng(rng)
    comp = complete_frame(eta)
    vals = []
    for _ in range(mc_samples):
        tilde = random_frame_in(comp, ell - k, rng)
        xi = np.column_stack([tilde, eta])
        if np.sum((xi.T @ ctx.a) ** 2) >= 1.0:
            continue
        vals.append(funk_normalized(ctx_k, f, xi, grid))
    if not vals:
        raise EmptySectionError("no sampled frame gives a nonempty section")
    v = np.asarray(vals)
    stderr = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("inf")
    return LinkEstimate(float(v.mean()), stderr, v.size / mc_samples, mc_samples)


# --------------------------------------------------------------------------
# plane lattices
# --------------------------------------------------------------------------

TRANSFORMS = ("F", "Pi", "R", "Fdot")
LATTICE_KINDS = ("parallel-grid", "pullback-grid", "line-grid", "central-random", "parallel-random")


def chebyshev_offsets(count: int) -> np.ndarray:
    """Offsets ``cos(pi (j + 1/2) / count)`` in (-1, 1), decreasing."""
    return np.cos(np.pi * (np.arange(count) + 0.5) / count)


def uniform_angles(count: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(count) / count


@dataclass(frozen=True)
class PlaneLattice:
    """Deterministic list of planes a transform is sampled on.

    Grid kinds (``n = 2``, ``k = 2``; lines in the plane for ``line-grid``)
    use normal angles ``2 pi i / n_angle`` and Chebyshev offsets.  The
    ``pullback-grid`` consists of the images under ``phi_{a*}`` of the
    ``parallel-grid`` planes, i.e. planes through ``a``.  Random kinds draw
    ``count`` planes from ``seed``.
    """

    kind: str
    n_angle: int = 0
    n_offset: int = 0
    count: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in LATTICE_KINDS:
            raise DomainError(f"unknown lattice kind {self.kind!r}")
        if self.kind.endswith("grid") and (self.n_angle < 1 or self.n_offset < 1):
            raise DomainError("grid lattices need n_angle and n_offset")
        if self.kind.endswith("random") and self.count < 1:
            raise DomainError("random lattices need a positive count")

    @property
    def shape(self) -> tuple:
        return (self.n_angle, self.n_offset) if self.kind.endswith("grid") else (self.count,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def angles(self) -> np.ndarray:
        return uniform_angles(self.n_angle)

    def offsets(self) -> np.ndarray:
        return chebyshev_offsets(self.n_offset)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_angle": self.n_angle, "n_offset": self.n_offset, "count": self.count, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "PlaneLattice":
        return cls(d["kind"], int(d.get("n_angle", 0)), int(d.get("n_offset", 0)), int(d.get("count", 0)), int(d.get("seed", 0)))

    def planes(self, ctx: CenterContext | None = None) -> list:
        """Planes in C order of :attr:`shape`."""
        if self.kind == "line-grid":
            out = []
            for psi in self.angles():
                nrm = np.array([[np.cos(psi)], [np.sin(psi)]])
                out.extend(EuclideanPlane.from_normal(nrm, p) for p in self.offsets())
            return out
        if ctx is None:
            raise DomainError(f"{self.kind} lattice needs a center context")
        if self.kind in ("parallel-grid", "pullback-grid"):
            if ctx.n != 2 or ctx.k != 2:
                raise DomainError("grid lattices are defined for n = 2, k = 2")
            E = perp_basis(ctx)
            out = []
            for psi in self.angles():
                eta = (np.cos(psi) * E[:, 0] + np.sin(psi) * E[:, 1])[:, None]
                for p in self.offsets():
                    plane = ParallelPlane(eta, ctx.a, [p])
                    out.append(parallel_to_central(ctx, plane) if self.kind == "pullback-grid" else plane)
            return out
        rng = np.random.default_rng(self.seed)
        dim, m = ctx.a.size, ctx.a.size - ctx.k
        out = []
        if self.kind == "central-random":
            while len(out) < self.count:
                xi = random_frame(dim, m, rng)
                if np.sum((xi.T @ ctx.a) ** 2) < 1.0:
                    out.append(CentralPlane(xi, ctx.a))
            return out
        E = perp_basis(ctx)
        while len(out) < self.count:
            eta = random_frame_in(E, m, rng)
            t = rng.uniform(-1.0, 1.0, size=m)
            if t @ t < 1.0:
                out.append(ParallelPlane(eta, ctx.a, t))
        return out


# --------------------------------------------------------------------------
# section profiles
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SectionProfile:
    """Transform values on a plane lattice together with their provenance."""

    transform: str
    n: int
    k: int
    a: tuple
    lattice: PlaneLattice
    values: np.ndarray
    quadrature: dict = field(default_factory=dict)
    flags: tuple = ()
    version: str = __version__

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise DomainError(f"unknown transform {self.transform!r}")
        v = np.array(self.values, dtype=float).reshape(self.lattice.shape)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "a", tuple(float(c) for c in self.a))
        object.__setattr__(self, "flags", tuple(int(i) for i in self.flags))
        bad = set(np.flatnonzero(~np.isfinite(v.ravel())).tolist())
        if bad != set(self.flags):
            raise DomainError("non-finite values must be exactly the flagged lattice points")

    def header(self) -> dict:
        return {
            "kind": "profile",
            "transform": self.transform,
            "n": self.n,
            "k": self.k,
            "a": list(self.a),
            "lattice": self.lattice.to_dict(),
            "quadrature": self.quadrature,
            "flags": list(self.flags),
            "version": self.version,
        }

    def save(self, path):
        idx = np.indices(self.lattice.shape).reshape(len(self.lattice.shape), -1)
        names = ["angle_index", "offset_index"] if len(self.lattice.shape) == 2 else ["plane_index"]
        cols = {nm: ix for nm, ix in zip(names, idx)}
        cols["value"] = self.values.ravel()
        write_table(path, self.header(), cols)

    @classmethod
    def load(cls, path) -> "SectionProfile":
        header, cols = read_table(path)
        if header.get("kind") != "profile":
            raise DomainError(f"{path} is not a section profile")
        lattice = PlaneLattice.from_dict(header["lattice"])
        vals = np.empty(lattice.shape)
        if len(lattice.shape) == 2:
            vals[cols["angle_index"], cols["offset_index"]] = cols["value"]
        else:
            vals[cols["plane_index"]] = cols["value"]
        return cls(
            header["transform"], header["n"], header["k"], tuple(header["a"]), lattice, vals,
            header.get("quadrature", {}), tuple(header.get("flags", [])), header.get("version", "unknown"),
        )

    def matches(self, n: int, k: int, a) -> bool:
        return self.n == n and self.k == k and np.array_equal(np.asarray(self.a), np.asarray(a, dtype=float))


def _plane_value(transform, ctx, f, plane, grid, radon_size):
    if transform == "F":
        return funk_transform(ctx, f, plane, grid)
    if transform == "Pi":
        return parallel_slice_transform(ctx, f, plane, grid)
    if transform == "Fdot":
        return funk_normalized(ctx, f, plane.normal, grid)
    return radon_john(f, plane, radon_size)


def profile_sweep(
    ctx: CenterContext | None,
    f,
    lattice: PlaneLattice,
    transform: str = "F",
    grid: SectionGrid | None = None,
    threads: int = 1,
    radon_size: int = RADON_SIZE,
) -> SectionProfile:
    """Evaluate a transform on every plane of ``lattice``.

    Planes on which evaluation fails get NaN and their flat index is listed
    in ``flags``.  The result does not depend on ``threads``.
    """
    if transform not in TRANSFORMS:
        raise DomainError(f"unknown transform {transform!r}")
    if transform == "R" and lattice.kind != "line-grid":
        raise DomainError("the Radon-John sweep runs on a line-grid lattice")
    if transform == "F" and lattice.kind not in ("pullback-grid", "central-random"):
        raise DomainError("F needs planes through a")
    if transform == "Pi" and lattice.kind not in ("parallel-grid", "parallel-random"):
        raise DomainError("Pi needs planes parallel to a")
    if transform == "Fdot" and lattice.kind != "central-random":
        raise DomainError("Fdot runs on a central-random lattice")
    grid = grid or SectionGrid()
    planes = lattice.planes(ctx)

    def work(chunk):
        if transform == "R":
            base = np.stack([planes[i].base for i in chunk])
            shift = np.stack([planes[i].shift for i in chunk])
            return list(radon_john_batch(f, base, shift, radon_size))
        out = []
        for i in chunk:
            try:
                out.append(_plane_value(transform, ctx, f, planes[i], grid, radon_size))
            except GeometryError as exc:
                log.warning("plane %d failed: %s", i, exc)
                out.append(float("nan"))
        return out

    chunks = np.array_split(np.arange(len(planes)), max(1, min(len(planes), 8 * max(1, threads))))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    values = np.array([v for part in parts for v in part], dtype=float)
    flags = tuple(np.flatnonzero(np.isnan(values)).tolist())
    quad = {"section": grid.to_dict()}
    if transform == "R":
        quad["radon_size"] = radon_size
    a = ctx.a if ctx is not None else ()
    n = ctx.n if ctx is not None else planes[0].ambient_dim
    k = ctx.k if ctx is not None else planes[0].dim
    return SectionProfile(transform, n, k, tuple(a), lattice, values, quad, flags)
