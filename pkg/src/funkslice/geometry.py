"""Linear-algebra substrate: projections, frames, planes and section quadrature.

Points of R^{n+1} are plain 1-d numpy arrays; batches of points are arrays of
shape ``(..., n+1)``.  Frames are ``(n+1, m)`` arrays with orthonormal
columns.  An affine plane is stored through its normal frame ``N`` and offset
``b``, i.e. ``{x : N'x = b}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

FRAME_TOL = 1e-12


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class DomainError(GeometryError):
    """An argument lies outside the domain of an operation."""


class SingularityError(GeometryError):
    """A matrix that must be invertible is (numerically) singular."""


class EmptySectionError(GeometryError):
    """A plane does not meet the open unit ball."""


def _vec(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite coordinates")
    return x


def _nonzero(a) -> np.ndarray:
    a = _vec(a)
    if a.ndim != 1:
        raise DomainError("expected a single vector")
    if not np.any(a):
        raise DomainError("zero vector")
    return a


def project_along(a, x) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the line spanned by ``a``."""
    a = _nonzero(a)
    x = _vec(x)
    coef = (x @ a) / (a @ a)
    return coef[..., None] * a


def project_perp(a, x) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the hyperplane ``a^perp``."""
    x = _vec(x)
    return x - project_along(a, x)


def unit(a) -> np.ndarray:
    a = _nonzero(a)
    return a / np.linalg.norm(a)


# --------------------------------------------------------------------------
# frames
# --------------------------------------------------------------------------


def gram_residual(frame) -> float:
    frame = np.asarray(frame, dtype=float)
    m = frame.shape[1]
    return float(np.max(np.abs(frame.T @ frame - np.eye(m)), initial=0.0))


def check_frame(frame, tol: float = FRAME_TOL) -> np.ndarray:
    frame = np.atleast_2d(np.asarray(frame, dtype=float))
    if frame.ndim != 2 or frame.shape[1] > frame.shape[0]:
        raise DomainError(f"bad frame shape {frame.shape}")
    if gram_residual(frame) > tol:
        raise DomainError("frame columns are not orthonormal")
    return frame


def as_frame(vectors) -> np.ndarray:
    """Column-orthonormalize ``vectors`` (columns) with positive-diagonal QR."""
    m = np.asarray(vectors, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    q, r = np.linalg.qr(m)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def complete_frame(frame) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(frame)``.

    Uses a complete QR factorization; the first ``m`` columns of ``Q`` are
    sign-fixed to reproduce ``frame`` so that ``[frame, complement]`` is an
    orthogonal matrix.
    """
    frame = np.asarray(frame, dtype=float)
    if frame.ndim == 1:
        frame = frame[:, None]
    m = frame.shape[1]
    if m == 0:
        return np.eye(frame.shape[0])
    q, r = np.linalg.qr(frame, mode="complete")
    return q[:, m:]


def rotation_to_frame(frame) -> np.ndarray:
    """An orthogonal ``r`` with ``r @ xi0 = frame``, ``xi0 = [0; I_m]``.

    The columns of ``frame`` become the last ``m`` columns of ``r``.
    """
    frame = np.asarray(frame, dtype=float)
    comp = complete_frame(frame)
    return np.column_stack([comp, frame])


def normal_projector(frame) -> np.ndarray:
    frame = np.asarray(frame, dtype=float)
    return frame @ frame.T


def random_frame(dim: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed point of St(dim, m)."""
    return as_frame(rng.standard_normal((dim, m)))


def random_frame_in(basis, m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``m``-frame inside ``span(basis)`` (orthonormal columns)."""
    basis = np.asarray(basis, dtype=float)
    return basis @ random_frame(basis.shape[1], m, rng)


def polar_factor(M, rcond: float = 1e-12):
    """Polar form ``M = eta @ root`` with ``root`` the PSD square root of ``M'M``.

    Returns ``(eta, root, inv_root)``.  Raises SingularityError when ``M``
    does not have full column rank.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    rho = M.T @ M
    lam, vec = np.linalg.eigh(rho)
    if lam[-1] <= 0 or lam[0] < rcond * lam[-1]:
        raise SingularityError("matrix is not of full column rank")
    root = (vec * np.sqrt(lam)) @ vec.T
    inv_root = (vec / np.sqrt(lam)) @ vec.T
    return M @ inv_root, root, inv_root


def det_identity_check(A, B) -> float:
    """``|det(I_p + AB) - det(I_q + BA)|`` for ``A`` (p x q) and ``B`` (q x p)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    p, q = A.shape
    if B.shape != (q, p):
        raise DomainError("incompatible shapes")
    lhs = np.linalg.det(np.eye(p) + A @ B)
    rhs = np.linalg.det(np.eye(q) + B @ A)
    return float(abs(lhs - rhs))


# --------------------------------------------------------------------------
# planes
# --------------------------------------------------------------------------


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class AffinePlane:
    """Affine plane ``{x : normal' x = offset}`` with orthonormal ``normal``."""

    normal: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        normal = check_frame(self.normal)
        offset = np.atleast_1d(np.asarray(self.offset, dtype=float)).copy()
        if offset.shape != (normal.shape[1],):
            raise DomainError("offset length must equal the normal frame size")
        normal = normal.copy()
        _freeze(normal, offset)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", offset)

    @property
    def ambient_dim(self) -> int:
        return self.normal.shape[0]

    @property
    def dim(self) -> int:
        return self.normal.shape[0] - self.normal.shape[1]

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.offset))

    @property
    def foot(self) -> np.ndarray:
        """Point of the plane closest to the origin."""
        return self.normal @ self.offset

    def residual(self, x) -> np.ndarray:
        """``normal' x - offset`` for a batch of points."""
        return np.asarray(x) @ self.normal - self.offset

    def projector(self) -> np.ndarray:
        return normal_projector(self.normal)

    def same_as(self, other: "AffinePlane", tol: float = 1e-11) -> bool:
        return plane_distance(self, other) <= tol


def plane_distance(p: AffinePlane, q: AffinePlane) -> float:
    """Discrepancy of two planes: projector difference plus foot-point difference."""
    dp = np.max(np.abs(p.projector() - q.projector()))
    df = np.max(np.abs(p.foot - q.foot))
    return float(max(dp, df))


class CentralPlane(AffinePlane):
    """k-plane through the point ``center``; offset is ``normal' center``."""

    def __init__(self, normal, center):
        normal = check_frame(normal)
        center = _vec(center)
        super().__init__(normal, normal.T @ center)
        center = center.copy()
        _freeze(center)
        object.__setattr__(self, "center", center)

    @property
    def meets_ball(self) -> bool:
        return self.distance < 1.0


class ParallelPlane(AffinePlane):
    """k-plane parallel to ``direction`` given by ``normal' y = offset``."""

    def __init__(self, normal, direction, offset, tol: float = FRAME_TOL):
        normal = check_frame(normal)
        direction = _nonzero(direction)
        if np.max(np.abs(normal.T @ unit(direction))) > tol:
            raise DomainError("normal frame is not orthogonal to the direction")
        super().__init__(normal, offset)
        direction = direction.copy()
        _freeze(direction)
        object.__setattr__(self, "direction", direction)

    @property
    def meets_ball(self) -> bool:
        return self.distance < 1.0

    @property
    def shift(self) -> np.ndarray:
        """The offset vector ``u = normal @ t`` (lies in ``direction^perp``)."""
        return self.foot


@dataclass(frozen=True, eq=False)
class EuclideanPlane:
    """d-plane ``tau(tau0, u) = u + span(base)`` in R^m with ``u`` orthogonal to ``base``."""

    base: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        base = check_frame(self.base).copy()
        shift = _vec(self.shift).copy()
        if shift.shape != (base.shape[0],):
            raise DomainError("shift must live in the ambient space")
        if np.max(np.abs(base.T @ shift), initial=0.0) > FRAME_TOL * max(1.0, np.linalg.norm(shift)):
            raise DomainError("shift is not orthogonal to the base subspace")
        _freeze(base, shift)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "shift", shift)

    @property
    def dim(self) -> int:
        return self.base.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.base.shape[0]

    @classmethod
    def from_normal(cls, normal, offset) -> "EuclideanPlane":
        """Plane ``{y : normal' y = offset}``."""
        normal = check_frame(normal)
        offset = np.atleast_1d(np.asarray(offset, dtype=float))
        return cls(complete_frame(normal), normal @ offset)


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------


def sphere_area(j: int, radius: float = 1.0) -> float:
    """Surface area of the ``j``-sphere of the given radius."""
    return float(2.0 * np.pi ** ((j + 1) / 2) / special.gamma((j + 1) / 2) * radius**j)


@lru_cache(maxsize=64)
def _sphere_rule(j: int, size: int):
    if j == 0:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if j == 1:
        th = 2.0 * np.pi * np.arange(size) / size
        nodes = np.column_stack([np.cos(th), np.sin(th)])
        return nodes, np.full(size, 2.0 * np.pi / size)
    # omega = (sqrt(1-u^2) omega', u), weight (1-u^2)^{(j-2)/2} du d omega'
    npolar = max(size // 2, 2)
    alpha = (j - 2) / 2.0
    if alpha == 0:
        u, wu = np.polynomial.legendre.leggauss(npolar)
    else:
        u, wu = special.roots_jacobi(npolar, alpha, alpha)
    sub_nodes, sub_w = _sphere_rule(j - 1, size)
    s = np.sqrt(1.0 - u**2)
    nodes = np.concatenate(
        [np.column_stack([si * sub_nodes, np.full(len(sub_nodes), ui)]) for ui, si in zip(u, s)]
    )
    weights = np.concatenate([wi * sub_w for wi in wu])
    return nodes, weights


def sphere_quadrature(j: int, size: int = 64):
    """Product rule on the unit ``j``-sphere in R^{j+1}.

    The circle uses the ``size``-point trapezoid rule; higher spheres add
    ``size // 2`` Gauss-Jacobi nodes per polar level.  Weights sum to the
    surface area.  Returned arrays are read-only views of a cached rule.
    """
    if j < 0:
        raise DomainError("sphere dimension must be non-negative")
    nodes, weights = _sphere_rule(int(j), int(size))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


DEFAULT_SECTION_SIZE = {2: 256, 3: 128}


@dataclass(frozen=True)
class SectionGrid:
    """Quadrature settings for spherical sections.

    ``size`` is the trapezoid node count on circles; for (k-1)-spheres with
    k > 2 the rule is the product rule of :func:`sphere_quadrature`.
    """

    size: int | None = None
    rule: str = "product-gauss"

    def size_for(self, k: int) -> int:
        if self.size is not None:
            return int(self.size)
        return DEFAULT_SECTION_SIZE.get(k, 32)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "size": self.size}


def sphere_section_nodes(plane: AffinePlane, grid: SectionGrid | None = None, basis=None):
    """Nodes and weights on ``S^n  cap plane``.

    The section is a (k-1)-sphere centred at the foot of the plane with
    radius ``sqrt(1 - dist^2)``; weights sum to its surface area.
    ``basis`` (orthonormal, spanning the plane's direction space) overrides
    the QR completion of the normal frame.
    """
    grid = grid or SectionGrid()
    dist2 = float(plane.offset @ plane.offset)
    if dist2 >= 1.0:
        raise EmptySectionError(f"plane at distance {np.sqrt(dist2):.6g} misses the open ball")
    k = plane.dim
    r = np.sqrt(1.0 - dist2)
    if basis is None:
        basis = complete_frame(plane.normal)
    else:
        basis = check_frame(basis)
        if basis.shape[1] != k or np.max(np.abs(plane.normal.T @ basis)) > FRAME_TOL:
            raise DomainError("basis must span the direction space of the plane")
    om, w = sphere_quadrature(k - 1, grid.size_for(k))
    nodes = plane.foot + r * (om @ basis.T)
    return nodes, w * r ** (k - 1)


def lat_lon_grid(nlat: int, nlon: int):
    """Cell-centred latitude-longitude grid on S^2 with area weights.

    Returns ``(points, weights, theta, phi)`` where ``points`` has shape
    ``(nlat, nlon, 3)``.
    """
    theta = np.pi * (np.arange(nlat) + 0.5) / nlat
    phi = 2.0 * np.pi * np.arange(nlon) / nlon
    T, P = np.meshgrid(theta, phi, indexing="ij")
    pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    dth = np.pi / nlat
    w = 2.0 * np.sin(T) * np.sin(dth / 2) * (2.0 * np.pi / nlon)
    return pts, w, theta, phi
