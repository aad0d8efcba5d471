"""Reconstruction: dual means, Radon-John inversion, and the slice and Funk inversions.

A *hyperplane function* is a callable ``Phi(normals, offsets)`` giving the
data on the hyperplanes ``{y : normal . y = offset}``; it must be
vectorised over leading axes and is taken to vanish on hyperplanes that
miss the unit ball.  A *plane function* for lower-dimensional planes takes
``(base, shift)`` with ``base`` of shape ``(..., m, d)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .fractional import (
    AccuracyWarning,
    _half_angle_rule,
    FractionalOpSpec,
    RadialProfile,
    ek_derivative,
    extrapolate_to_zero,
)
from .geometry import DomainError, complete_frame, sphere_area, sphere_quadrature

SUPPORT = 1.0


class ExtrapolationError(DomainError):
    """No usable sample of the dual mean, or an unstable limit."""


class ReconstructionAccuracyError(ArithmeticError):
    """The t -> 0 extrapolation residual exceeds its threshold."""


@dataclass(frozen=True)
class InversionSettings:
    """Numerical knobs of the Radon-John inversion.

    ``ladder`` t values are ``t_hi * 2**-j`` with
    ``t_hi = min(t_cap, gap_fraction * (1 - |x|))``; the limit is a
    polynomial fit in ``t^2`` of degree ``fit_degree``.
    """

    angular: int = 64
    radial: int = 32
    ladder: int = 4
    t_cap: float = 0.2
    gap_fraction: float = 0.25
    fit_degree: int = 2
    max_fit_residual: float = 1e-3
    rel_step: float = 1.0 / 64.0
    quad: int = 48

    def to_dict(self) -> dict:
        return dict(self.__dict__)


DEFAULT_SETTINGS = InversionSettings()


# --------------------------------------------------------------------------
# dual mean
# --------------------------------------------------------------------------


def _hyperplane_dual_mean(Phi, x, t, angular: int):
    m = x.size
    r = float(np.linalg.norm(x))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    area = sphere_area(m - 1)
    if r < 1e-14:
        om, w = sphere_quadrature(m - 1, angular)
        vals = Phi(np.broadcast_to(om, (t.size,) + om.shape), np.broadcast_to(t[:, None], (t.size, om.shape[0])))
        vals = np.where(t[:, None] < SUPPORT, vals, 0.0)
        return (vals @ w) / area

    xhat = x / r
    perp = complete_frame(xhat)
    sub, wsub = sphere_quadrature(m - 2, angular)
    sub = sub @ perp.T  # (K, m)
    theta, wt = _half_angle_rule(angular, 0.0)
    c_max = np.clip((SUPPORT - t) / r, -1.0, 1.0)
    g0 = np.arccos(c_max)  # gamma below g0 puts the plane outside the ball
    span = np.pi - g0
    gam = g0[:, None] + span[:, None] * np.sin(theta) ** 2
    wg = span[:, None] * 2.0 * np.sin(theta) * np.cos(theta) * wt * np.sin(gam) ** (m - 2)
    cg, sg = np.cos(gam), np.sin(gam)
    normals = cg[..., None, None] * xhat + sg[..., None, None] * sub  # (T, G, K, m)
    offsets = np.broadcast_to((r * cg + t[:, None])[..., None], normals.shape[:-1])
    vals = Phi(normals, offsets)
    out = np.einsum("tgk,tg,k->t", vals, wg, wsub) / area
    out[t >= SUPPORT + r] = 0.0
    return out


def _stiefel_rule(m: int, d: int, angular: int):
    """Product rule over (offset direction w, d-frame in w^perp)."""
    w_nodes, w_w = sphere_quadrature(m - 1, angular)
    rows = []
    for w, ww in zip(w_nodes, w_w):
        rest = complete_frame(w)
        frames = [(np.zeros((m - 1, 0)), 1.0)]
        for j in range(d):
            dim = m - 1 - j
            new = []
            for f0, fw in frames:
                comp = complete_frame(f0) if f0.shape[1] else np.eye(m - 1)
                vn, vw = sphere_quadrature(dim - 1, angular)
                for v, vvw in zip(vn, vw):
                    new.append((np.column_stack([f0, comp @ v]), fw * vvw))
            frames = new
        for f0, fw in frames:
            rows.append((w, rest @ f0, ww * fw))
    wv = np.array([r[0] for r in rows])
    base = np.array([r[1] for r in rows])
    weight = np.array([r[2] for r in rows])
    return wv, base, weight / weight.sum()


def dual_mean(Phi, x, t, d: int | None = None, angular: int = 64) -> np.ndarray:
    """Mean of ``Phi`` over the d-planes at distance ``t`` from ``x``.

    For hyperplanes (``d = m - 1``, the default) the angular integral is
    restricted to the planes meeting the unit ball, which keeps the rule
    accurate when the data jump at the ball's boundary.  For ``d < m - 1``
    ``Phi`` takes ``(base, shift)`` and a plain product rule is used.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    d = m - 1 if d is None else d
    if not 1 <= d <= m - 1:
        raise DomainError("need 1 <= d <= m-1")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if d == m - 1:
        return _hyperplane_dual_mean(Phi, x, t, angular)
    wv, base, weight = _stiefel_rule(m, d, max(angular // 4, 8))
    out = np.empty(t.size)
    for i, ti in enumerate(t):
        shift = x + ti * wv
        shift = shift - np.einsum("nmd,nd->nm", base, np.einsum("nmd,nm->nd", base, shift))
        out[i] = np.sum(weight * Phi(base, shift))
    return out


# --------------------------------------------------------------------------
# Radon-John inversion
# --------------------------------------------------------------------------


def radial_breaks(gap: float, t_max: float, ratio: float = 4.0) -> list[float]:
    """``0, gap`` and then pieces growing geometrically away from ``gap``."""
    out = [0.0, gap]
    width = gap
    while out[-1] + ratio * width < t_max:
        width *= ratio
        out.append(gap + width)
    out.append(t_max)
    return out


@dataclass
class PointReconstruction:
    value: float
    ladder: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    fit_residual: float = 0.0


def radon_invert_point(Phi, x, d: int | None = None, settings: InversionSettings = DEFAULT_SETTINGS) -> PointReconstruction:
    """Recover ``phi(x)`` from ``Phi = R phi`` for ``phi`` supported in the unit ball.

    Evaluates ``pi^{-d/2} (D^{d/2} R*_x Phi)(t)`` on a geometric ladder of
    small ``t`` and extrapolates to ``t = 0`` by a polynomial fit in ``t^2``.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    d = m - 1 if d is None else d
    r = float(np.linalg.norm(x))
    if r >= SUPPORT:
        raise ExtrapolationError("point lies outside the open unit ball")
    gap = SUPPORT - r
    t_max = SUPPORT + r
    breaks = radial_breaks(gap, t_max) if r > 1e-12 else [0.0, t_max]

    def mean(s):
        return dual_mean(Phi, x, s, d=d, angular=settings.angular)

    F = RadialProfile.sample(mean, breaks, settings.radial)
    spec = FractionalOpSpec(d, rel_step=settings.rel_step, n=settings.quad)
    t_hi = min(settings.t_cap, settings.gap_fraction * gap)
    ladder = t_hi * 2.0 ** -np.arange(settings.ladder)
    samples = np.pi ** (-d / 2.0) * ek_derivative(spec, F, ladder)
    value, resid = extrapolate_to_zero(ladder, samples, settings.fit_degree)
    return PointReconstruction(value, ladder, samples, resid)


def radon_invert(Phi, x, d: int | None = None, settings: InversionSettings = DEFAULT_SETTINGS, strict: bool = False):
    """``phi(x)`` from Radon-John data; ``x`` may be one point or a batch ``(N, m)``."""
    x = np.asarray(x, dtype=float)
    pts = x[None] if x.ndim == 1 else x
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        rec = radon_invert_point(Phi, p, d, settings)
        if rec.fit_residual > settings.max_fit_residual * max(1.0, abs(rec.value)):
            msg = f"unstable t->0 limit at {p}: residual {rec.fit_residual:.3g}"
            if strict:
                raise ReconstructionAccuracyError(msg)
            warnings.warn(msg, AccuracyWarning, stacklevel=2)
        out[i] = rec.value
    return out[0] if x.ndim == 1 else out


# --------------------------------------------------------------------------
# data interpolation
# --------------------------------------------------------------------------

PAD = 16


class LineData:
    """Line data in R^2 on an (angle x offset) grid, as a callable ``Phi(normals, offsets)``.

    Angles are ``2 pi i / n_angle`` and offsets ``cos(theta_j)`` with
    ``theta_j = pi (j + 1/2) / n_offset``.  Interpolation is cubic B-spline in
    (angle, theta): periodic in the angle and even about ``theta = 0, pi``,
    which is exact for data depending smoothly on ``cos(theta)``.
    """

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 2 or min(v.shape) < 4:
            raise DomainError("line data needs at least a 4 x 4 grid")
        if not np.all(np.isfinite(v)):
            raise DomainError("line data contains non-finite values")
        self.shape = v.shape
        padded = np.pad(v, ((PAD, PAD), (0, 0)), mode="wrap")
        padded = np.pad(padded, ((0, 0), (PAD, PAD)), mode="symmetric")
        self._coef = ndimage.spline_filter(padded, order=3, mode="mirror")

    def __call__(self, normals, offsets):
        normals = np.asarray(normals, dtype=float)
        offsets = np.asarray(offsets, dtype=float)
        na, no = self.shape
        psi = np.mod(np.arctan2(normals[..., 1], normals[..., 0]), 2.0 * np.pi)
        theta = np.arccos(np.clip(offsets, -1.0, 1.0))
        ci = psi * (na / (2.0 * np.pi)) + PAD
        cj = theta * (no / np.pi) - 0.5 + PAD
        out = ndimage.map_coordinates(self._coef, [ci.ravel(), cj.ravel()], order=3, prefilter=False, mode="nearest")
        out = out.reshape(offsets.shape)
        return np.where(np.abs(offsets) < SUPPORT, out, 0.0)


class OffsetData:
    """Hyperplane data that depend on the offset only (rotation-invariant densities).

    Chebyshev interpolation of samples at the offsets ``cos(pi (j + 1/2) / N)``.
    """

    def __init__(self, offsets, values):
        offsets = np.asarray(offsets, dtype=float)
        values = np.asarray(values, dtype=float)
        self._cheb = np.polynomial.Chebyshev.fit(offsets, values, offsets.size - 1, domain=[-1.0, 1.0])

    def __call__(self, normals, offsets):
        offsets = np.asarray(offsets, dtype=float)
        return np.where(np.abs(offsets) < SUPPORT, self._cheb(np.clip(offsets, -1.0, 1.0)), 0.0)


def line_data_from_profile(profile) -> LineData:
    if profile.transform != "R" or profile.lattice.kind != "line-grid":
        raise DomainError("expected a Radon-John profile on a line-grid lattice")
    return LineData(profile.values)


# --------------------------------------------------------------------------
# parallel slice and shifted Funk inversion (n = 2, k = 2)
# --------------------------------------------------------------------------

EQUATOR_TOL = 1e-10
CLAMP_RADIUS = 1.0 - 1e-6


@dataclass
class PointSet:
    """Reconstructed values at a batch of points plus per-point flags."""

    values: np.ndarray
    equator: np.ndarray
    clamped: np.ndarray
    residual: np.ndarray


class SliceInverter:
    """Recovers the ``a^perp``-even part of ``f`` from ``Pi_a f`` sampled on a parallel grid.

    ``values[i, j]`` is the transform on the plane with normal
    ``cos(psi_i) e_1 + sin(psi_i) e_2`` (``e`` the basis from
    :func:`perp_basis`) and offset ``p_j``.
    """

    def __init__(self, ctx, values, settings: InversionSettings = DEFAULT_SETTINGS):
        from .transforms import chebyshev_offsets, perp_basis

        if ctx.n != 2 or ctx.k != 2:
            raise DomainError("grid-based slice inversion is implemented for n = 2, k = 2")
        values = np.asarray(values, dtype=float)
        p = chebyshev_offsets(values.shape[1])
        self.ctx = ctx
        self.basis = perp_basis(ctx)
        self.settings = settings
        self.data = LineData(values / np.sqrt(1.0 - p**2))

    def __call__(self, x, strict: bool = False) -> PointSet:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        height = x @ self.ctx.a_hat
        y = x @ self.basis
        r = np.linalg.norm(y, axis=1)
        vals = np.zeros(len(x))
        equator = np.abs(height) < EQUATOR_TOL
        clamped = (r > CLAMP_RADIUS) & ~equator
        resid = np.zeros(len(x))
        for i in np.flatnonzero(~equator):
            yi = y[i] * (CLAMP_RADIUS / r[i]) if clamped[i] else y[i]
            rec = radon_invert_point(self.data, yi, 1, self.settings)
            if rec.fit_residual > self.settings.max_fit_residual * max(1.0, abs(rec.value)):
                msg = f"unstable t->0 limit at {x[i]}: residual {rec.fit_residual:.3g}"
                if strict:
                    raise ReconstructionAccuracyError(msg)
                warnings.warn(msg, AccuracyWarning, stacklevel=2)
            vals[i] = 0.5 * abs(height[i]) * rec.value
            resid[i] = rec.fit_residual
        return PointSet(vals, equator, clamped, resid)


def _run_chunked(inverter, pts, threads: int) -> PointSet:
    if threads <= 1 or len(pts) < 2:
        return inverter(pts)
    from concurrent.futures import ThreadPoolExecutor

    chunks = np.array_split(pts, min(len(pts), 4 * threads))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(inverter, chunks))
    return PointSet(*(np.concatenate([getattr(p, nm) for p in parts]) for nm in ("values", "equator", "clamped", "residual")))


def slice_invert_points(ctx, profile, x, settings: InversionSettings = DEFAULT_SETTINGS, threads: int = 1) -> PointSet:
    """``f_+`` with per-point flags at sphere points ``x`` from a ``Pi`` profile on a ``parallel-grid``."""
    if profile.transform != "Pi" or profile.lattice.kind != "parallel-grid":
        raise DomainError("expected a Pi profile on a parallel-grid lattice")
    _check_profile(ctx, profile)
    return _run_chunked(SliceInverter(ctx, profile.values, settings), np.atleast_2d(np.asarray(x, dtype=float)), threads)


def slice_invert(ctx, profile, x, settings: InversionSettings = DEFAULT_SETTINGS):
    """``f_+`` at sphere point(s) ``x`` from a ``Pi`` profile on a ``parallel-grid`` lattice."""
    res = slice_invert_points(ctx, profile, x, settings)
    return res.values[0] if np.asarray(x).ndim == 1 else res.values


def _check_profile(ctx, profile):
    if not profile.matches(ctx.n, ctx.k, ctx.a):
        raise DomainError("profile was computed for a different (n, k, a)")
    if profile.flags:
        raise DomainError(f"profile has {len(profile.flags)} failed lattice points")


def funk_invert_points(ctx, profile, x, settings: InversionSettings = DEFAULT_SETTINGS, threads: int = 1) -> PointSet:
    """``M^{-1} Pi^{-1} g_a`` at sphere points ``x`` from an ``F`` profile on a ``pullback-grid``.

    The pullback lattice stores ``g`` on the planes ``phi_{a*}(zeta_ij)``, so
    its values are ``g_a`` on the parallel grid ``zeta_ij``.
    """
    if profile.transform != "F" or profile.lattice.kind != "pullback-grid":
        raise DomainError("expected an F profile on a pullback-grid lattice")
    _check_profile(ctx, profile)
    ctx.require_exterior()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = ctx.phi(x)
    res = _run_chunked(SliceInverter(ctx, profile.values, settings), y, threads)
    power = ctx.k - 1
    res.values = ctx.s_a_star ** (-power) * (1.0 - y @ ctx.a_star) ** power * res.values
    return res


def funk_invert(ctx, profile, nlat: int = 64, nlon: int = 128, settings: InversionSettings = DEFAULT_SETTINGS, threads: int = 1):
    """Reconstruct a W-even field on a ``nlat x nlon`` latitude-longitude grid."""
    from .fields import GridField
    from .geometry import lat_lon_grid

    pts, _, _, _ = lat_lon_grid(nlat, nlon)
    res = funk_invert_points(ctx, profile, pts.reshape(-1, 3), settings, threads)
    meta = {
        "source": "funk_invert",
        "a": list(ctx.a),
        "k": ctx.k,
        "settings": settings.to_dict(),
        "equator_points": int(res.equator.sum()),
        "clamped_points": int(res.clamped.sum()),
        "max_fit_residual": float(res.residual.max(initial=0.0)),
    }
    return GridField(res.values.reshape(nlat, nlon), meta)
