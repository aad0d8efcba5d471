"""Ball automorphisms, the plane bijection, and the weighted operators built on them.

Scalar fields are vectorised callables ``f(x)`` taking points of shape
``(..., n+1)`` and returning arrays of shape ``(...)``.  Every operator
here returns a new callable and never mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import (
    CentralPlane,
    DomainError,
    ParallelPlane,
    SingularityError,
    _nonzero,
    _vec,
    polar_factor,
    project_along,
    sphere_quadrature,
)

Field = Callable[[np.ndarray], np.ndarray]

POLE_TOL = 1e-13


class PoleError(DomainError):
    """Evaluation at the pole ``x . a = 1`` of a Moebius map."""


class InvalidPlaneError(DomainError):
    """A plane outside the family handled by an operation."""


def kelvin(a) -> np.ndarray:
    """Inversion ``a / |a|^2`` in the unit sphere."""
    a = _nonzero(a)
    return a / (a @ a)


def mobius(a, x) -> np.ndarray:
    """Involutive ball automorphism swapping ``0`` and ``a`` (requires ``|a| < 1``)."""
    a = _vec(a)
    x = _vec(x)
    aa = float(a @ a)
    if aa >= 1.0:
        raise DomainError("mobius map needs |a| < 1")
    if aa == 0.0:
        return -x
    s = np.sqrt(1.0 - aa)
    xa = x @ a
    denom = 1.0 - xa
    if np.any(np.abs(denom) < POLE_TOL):
        raise PoleError("x . a = 1")
    along = (xa / aa)[..., None] * a
    num = a - along - s * (x - along)
    return num / denom[..., None]


def reflect_hyperplane(a, x) -> np.ndarray:
    """Reflection ``R_a`` in the hyperplane ``a^perp``."""
    x = _vec(x)
    return x - 2.0 * project_along(a, x)


@dataclass(frozen=True, eq=False)
class CenterContext:
    """Center ``a`` together with its derived quantities and the section dimension ``k``."""

    a: np.ndarray
    k: int = 2

    def __post_init__(self):
        a = _vec(self.a).copy()
        if a.ndim != 1 or not np.all(np.isfinite(a)):
            raise DomainError("center must be a finite vector")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        if self.k < 1 or self.k > a.size - 1:
            raise DomainError(f"section dimension k={self.k} out of range for n={a.size - 1}")
        # a = 0 is allowed for the centred Funk transform; a* and a~ are then undefined
        a_star = a_hat = None
        if np.any(a != 0.0):
            a_star = kelvin(a)
            a_hat = a / np.linalg.norm(a)
            for v in (a_star, a_hat):
                v.setflags(write=False)
        object.__setattr__(self, "a_star", a_star)
        object.__setattr__(self, "a_hat", a_hat)

    @property
    def n(self) -> int:
        return self.a.size - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.a))

    @property
    def exterior(self) -> bool:
        return self.norm > 1.0

    @property
    def s_a_star(self) -> float:
        if not self.exterior:
            raise DomainError("s_{a*} needs an exterior center |a| > 1")
        return float(np.sqrt(1.0 - self.a_star @ self.a_star))

    def require_exterior(self):
        if not self.exterior:
            raise DomainError(f"operation needs |a| > 1, got |a| = {self.norm:.6g}")

    def phi(self, x) -> np.ndarray:
        """The automorphism ``phi_{a*}``."""
        self.require_exterior()
        return mobius(self.a_star, x)

    def with_k(self, k: int) -> "CenterContext":
        return CenterContext(self.a, k)


def reflect_through_center(ctx: CenterContext, x) -> np.ndarray:
    """Second intersection with the sphere of the line through ``a`` and ``x``."""
    ctx.require_exterior()
    x = _vec(x)
    a = ctx.a
    aa = a @ a
    diff = x - a
    num = (aa - 1.0) * x + (2.0 * (1.0 - x @ a))[..., None] * a
    return num / np.sum(diff * diff, axis=-1)[..., None]


# --------------------------------------------------------------------------
# plane bijection
# --------------------------------------------------------------------------


def central_to_parallel(ctx: CenterContext, plane: CentralPlane) -> ParallelPlane:
    """Image under ``phi_{a*}`` of a plane through ``a``."""
    ctx.require_exterior()
    xi = plane.normal
    xa = xi.T @ ctx.a
    if xa @ xa >= 1.0:
        raise InvalidPlaneError("plane through a misses the open ball")
    q = xi - np.outer(ctx.a_hat, ctx.a_hat @ xi)
    try:
        eta, _, inv_root = polar_factor(q)
    except SingularityError as exc:  # excluded by |xi'a| < 1 < |a|
        raise SingularityError("Q_{a*} xi is rank deficient for a valid plane") from exc
    t = -ctx.s_a_star * inv_root @ xa
    eta = eta - np.outer(ctx.a_hat, ctx.a_hat @ eta)
    return ParallelPlane(eta, ctx.a, t)


def parallel_to_central(ctx: CenterContext, plane: ParallelPlane) -> CentralPlane:
    """Image under ``phi_{a*}`` of a plane parallel to ``a``."""
    ctx.require_exterior()
    t = plane.offset
    if t @ t >= 1.0:
        raise InvalidPlaneError("parallel plane misses the open ball")
    xi_raw = ctx.s_a_star * plane.normal - np.outer(ctx.a_star, t)
    xi, _, _ = polar_factor(xi_raw)
    return CentralPlane(xi, ctx.a)


def central_plane_image_residual(ctx: CenterContext, plane: CentralPlane, points) -> float:
    """Max violation of the image-plane equation by ``phi_{a*}`` of section points."""
    image = central_to_parallel(ctx, plane)
    return float(np.max(np.abs(image.residual(ctx.phi(points)))))


# --------------------------------------------------------------------------
# multipliers and the W operator
# --------------------------------------------------------------------------


def multiplier_M(ctx: CenterContext, f: Field, automorphism: Callable | None = None) -> Field:
    """``(M f)(y) = (s_{a*} / (1 - a* . y))^{k-1} f(phi_{a*} y)``.

    ``automorphism`` replaces ``phi_{a*}``; it exists for sensitivity tests.
    """
    ctx.require_exterior()
    s = ctx.s_a_star
    a_star = ctx.a_star
    power = ctx.k - 1
    phi = automorphism or ctx.phi

    def Mf(y):
        y = np.asarray(y, dtype=float)
        return (s / (1.0 - y @ a_star)) ** power * f(phi(y))

    return Mf


def multiplier_M_inverse(ctx: CenterContext, f: Field) -> Field:
    """``(M^{-1} f)(x) = s^{1-k} (1 - a* . phi x)^{k-1} f(phi x)``."""
    ctx.require_exterior()
    s = ctx.s_a_star
    a_star = ctx.a_star
    power = ctx.k - 1

    def Minv(x):
        y = ctx.phi(np.asarray(x, dtype=float))
        return s ** (-power) * (1.0 - y @ a_star) ** power * f(y)

    return Minv


def weight_rho(ctx: CenterContext, x) -> np.ndarray:
    """``((|a|^2 - 1) / |a - x|^2)^{k-1}`` on the sphere."""
    ctx.require_exterior()
    x = _vec(x)
    d = x - ctx.a
    return ((ctx.a @ ctx.a - 1.0) / np.sum(d * d, axis=-1)) ** (ctx.k - 1)


def weight_rho_mobius(ctx: CenterContext, x) -> np.ndarray:
    """The same weight written through ``phi_{a*}`` and ``R_a``."""
    y = ctx.phi(_vec(x))
    num = 1.0 - y @ ctx.a_star
    den = 1.0 - reflect_hyperplane(ctx.a, y) @ ctx.a_star
    return (num / den) ** (ctx.k - 1)


def involution_W(ctx: CenterContext, f: Field) -> Field:
    """``(W_a f)(x) = rho_{a*}(x) f(tau_a x)``."""
    ctx.require_exterior()

    def Wf(x):
        x = np.asarray(x, dtype=float)
        return weight_rho(ctx, x) * f(reflect_through_center(ctx, x))

    return Wf


def symmetrize_W(ctx: CenterContext, g: Field, sign: int = 1) -> Field:
    """``(g + sign * W_a g) / 2``: a W-even (sign=+1) or W-odd (sign=-1) field."""
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    Wg = involution_W(ctx, g)

    def h(x):
        return 0.5 * (g(x) + sign * Wg(x))

    return h


def parity_parts(a, f: Field) -> tuple[Field, Field]:
    """Even and odd parts of ``f`` with respect to reflection in ``a^perp``."""
    a = _nonzero(a)

    def plus(x):
        return 0.5 * (f(x) + f(reflect_hyperplane(a, x)))

    def minus(x):
        return 0.5 * (f(x) - f(reflect_hyperplane(a, x)))

    return plus, minus


def measure_change_sides(ctx: CenterContext, f: Field, size: int = 144) -> tuple[float, float]:
    """Both sides of the change-of-variables identity for ``phi_{a*}`` on ``S^n``."""
    ctx.require_exterior()
    nodes, w = sphere_quadrature(ctx.n, size)
    lhs = float(np.sum(w * f(nodes)))
    s = ctx.s_a_star
    jac = (s / (1.0 - nodes @ ctx.a_star)) ** ctx.n
    rhs = float(np.sum(w * jac * f(ctx.phi(nodes))))
    return lhs, rhs


def measure_change_residual(ctx: CenterContext, f: Field, size: int = 144) -> float:
    lhs, rhs = measure_change_sides(ctx, f, size)
    return abs(lhs - rhs)
