"""Erdelyi-Kober fractional integrals and derivatives in the variable ``t^2``.

Radial functions are represented by :class:`RadialProfile`, a piecewise
Chebyshev interpolant.  Each piece ``[lo, hi]`` is parametrised by
``s = lo + (hi - lo) sin^2(theta)``, which turns square-root endpoint
behaviour (typical of dual means of ball-supported data) into smooth
behaviour in ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gamma

import numpy as np
from scipy import special

from .geometry import DomainError


class AccuracyWarning(UserWarning):
    """A numerical derivative or limit looks unreliable."""


# --------------------------------------------------------------------------
# quadrature helpers
# --------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _half_angle_rule(n: int, power: float):
    """Nodes/weights on ``[0, pi/2]`` for weight ``theta**power`` (power > -1)."""
    if power == 0.0:
        x, w = np.polynomial.legendre.leggauss(n)
    else:
        x, w = special.roots_jacobi(n, 0.0, power)
    theta = 0.25 * np.pi * (1.0 + x)
    weights = w * (0.25 * np.pi) ** (1.0 + power)
    return theta, weights


def _piece_rule(n: int):
    """Gauss rule for ``int_lo^hi g(s) ds`` through ``s = lo + L sin^2 theta``.

    Returns ``(u, dsdtheta_over_L)`` with ``s = lo + L*u``.
    """
    theta, w = _half_angle_rule(n, 0.0)
    u = np.sin(theta) ** 2
    return u, w * 2.0 * np.sin(theta) * np.cos(theta)


# --------------------------------------------------------------------------
# radial profiles
# --------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _cheb_theta(n: int):
    # first-kind Chebyshev nodes mapped to theta in (0, pi/2), increasing
    j = np.arange(n)
    x = np.cos(np.pi * (2 * j + 1) / (2 * n))[::-1]
    theta = 0.25 * np.pi * (1.0 + x)
    bw = (-1.0) ** j * np.sin(np.pi * (2 * j + 1) / (2 * n))
    return theta, bw[::-1].copy()


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples of a function of ``t > 0`` with a piecewise interpolation rule.

    ``breaks`` is strictly increasing, starts at 0 and ends at ``t_max``;
    the function is taken to vanish for ``t >= t_max``.
    """

    breaks: np.ndarray
    nodes: np.ndarray  # (pieces, n)
    values: np.ndarray  # (pieces, n)

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0) or b[0] != 0.0:
            raise DomainError("breaks must increase strictly from 0")
        for name in ("breaks", "nodes", "values"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def t_max(self) -> float:
        return float(self.breaks[-1])

    @property
    def grid(self) -> np.ndarray:
        return self.nodes.ravel()

    @classmethod
    def sample(cls, func, breaks, n: int = 32) -> "RadialProfile":
        """Sample ``func`` (vectorised in t) on ``n`` nodes per piece."""
        breaks = np.asarray(breaks, dtype=float)
        theta, _ = _cheb_theta(n)
        lo, hi = breaks[:-1, None], breaks[1:, None]
        nodes = lo + (hi - lo) * np.sin(theta) ** 2
        values = np.asarray(func(nodes.ravel()), dtype=float).reshape(nodes.shape)
        return cls(breaks, nodes, values)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        n = self.nodes.shape[1]
        theta_n, bw = _cheb_theta(n)
        for i in range(len(self.breaks) - 1):
            lo, hi = self.breaks[i], self.breaks[i + 1]
            sel = (t < hi) if i == 0 else (t >= lo) & (t < hi)
            if not np.any(sel):
                continue
            u = np.clip((t[sel] - lo) / (hi - lo), 0.0, 1.0)
            theta = np.arcsin(np.sqrt(u))
            out[sel] = _barycentric(theta_n, bw, self.values[i], theta)
        return out


def _barycentric(xn, w, fn, x):
    diff = x[:, None] - xn[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    c = w / diff
    res = (c @ fn) / c.sum(axis=1)
    hit = exact.any(axis=1)
    if np.any(hit):
        res[hit] = fn[np.argmax(exact[hit], axis=1)]
    return res


# --------------------------------------------------------------------------
# Erdelyi-Kober operators
# --------------------------------------------------------------------------


def _breaks_of(f, t_max):
    if isinstance(f, RadialProfile):
        return f.breaks[1:]
    if t_max is None:
        raise DomainError("t_max is required for a plain callable")
    return np.atleast_1d(np.asarray(t_max, dtype=float))


GRADE_RATIO = 0.25


def _grading_levels(L, t) -> int:
    ratio = np.max(L / np.maximum(t, 1e-300))
    if ratio <= 4.0:
        return 0
    return int(min(np.ceil(np.log(ratio / 4.0) / np.log(1.0 / GRADE_RATIO)), 16))


def ek_integral(alpha: float, f, t, *, t_max=None, breaks=None, n: int = 48) -> np.ndarray:
    """``(2/Gamma(alpha)) int_t^inf f(s) s (s^2 - t^2)^(alpha-1) ds`` at the points ``t``.

    ``f`` is a :class:`RadialProfile` or a vectorised callable vanishing
    beyond ``t_max``.  Interior ``breaks`` (points where ``f`` is not smooth)
    split the integration range.
    """
    if alpha <= 0:
        raise DomainError("fractional order must be positive")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise DomainError("t must be non-negative")
    ends = list(_breaks_of(f, t_max))
    if breaks is not None:
        ends = sorted(set(ends) | {float(b) for b in np.atleast_1d(breaks) if 0 < b < ends[-1]})
    ends = np.asarray(ends)
    theta, wj = _half_angle_rule(n, 2.0 * alpha - 1.0)
    sin_t = np.sin(theta)
    # sin^{2a-1}(theta) = theta^{2a-1} (sin theta / theta)^{2a-1}; the theta power is in the rule
    ratio = np.where(theta > 0, sin_t / theta, 1.0) ** (2.0 * alpha - 1.0)
    u_first = sin_t**2
    u_rest, w_rest = _piece_rule(n)

    total = np.zeros(t.shape)
    starts = np.concatenate([[0.0], ends[:-1]])
    for lo_b, hi_b in zip(starts, ends):
        lo = np.maximum(t, lo_b)
        L = hi_b - lo
        live = L > 0
        if not np.any(live):
            continue
        tl, lol, Ll = t[live], lo[live], L[live]
        first = lol == tl
        val = np.zeros(tl.shape)
        if np.any(first):
            tf, Lf = tl[first], Ll[first]
            # geometric grading toward s = t resolves the scale-t structure
            levels = _grading_levels(Lf, tf)
            head = Lf * GRADE_RATIO**levels
            s = tf[:, None] + head[:, None] * u_first
            kern = 2.0 * head[:, None] ** alpha * ratio * np.cos(theta) * (s + tf[:, None]) ** (alpha - 1.0)
            fs = np.asarray(f(s.ravel())).reshape(s.shape)
            acc = (fs * s * kern) @ wj
            for j in range(levels, 0, -1):
                a0 = tf + Lf * GRADE_RATIO**j
                width = Lf * (GRADE_RATIO ** (j - 1) - GRADE_RATIO**j)
                s = a0[:, None] + width[:, None] * u_rest
                fs = np.asarray(f(s.ravel())).reshape(s.shape)
                kern = s * (s * s - tf[:, None] ** 2) ** (alpha - 1.0)
                acc += (fs * kern) @ w_rest * width
            val[first] = acc
        if np.any(~first):
            tr, lor, Lr = tl[~first], lol[~first], Ll[~first]
            # grade outward from lo when the piece is long next to lo - t
            levels = _grading_levels(Lr, lor - tr)
            cuts = [0.0] + [GRADE_RATIO**j for j in range(levels, -1, -1)]
            acc = np.zeros(tr.shape)
            for c0, c1 in zip(cuts[:-1], cuts[1:]):
                a0 = lor + Lr * c0
                width = Lr * (c1 - c0)
                s = a0[:, None] + width[:, None] * u_rest
                fs = np.asarray(f(s.ravel())).reshape(s.shape)
                kern = s * (s * s - tr[:, None] ** 2) ** (alpha - 1.0)
                acc += (fs * kern) @ w_rest * width
            val[~first] = acc
        total[live] += val
    return 2.0 / gamma(alpha) * total


def ek_integral_profile(alpha: float, f: RadialProfile, n: int = 48) -> RadialProfile:
    """The fractional integral of a profile, resampled on the profile's own nodes."""
    vals = ek_integral(alpha, f, f.nodes.ravel(), n=n).reshape(f.nodes.shape)
    return RadialProfile(f.breaks, f.nodes, vals)


def fd_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at 0 on integer ``offsets``."""
    offsets = np.asarray(offsets, dtype=float)
    m = offsets.size
    if order >= m:
        raise DomainError("stencil too small for the derivative order")
    A = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = gamma(order + 1)
    return np.linalg.solve(A, rhs)


STENCIL = np.array([-2.0, -1.0, 1.0, 2.0])


@dataclass(frozen=True)
class FractionalOpSpec:
    """Order ``d/2`` fractional derivative with its numerical settings.

    ``rel_step`` is the finite-difference step in ``u = t^2`` relative to
    ``u``; ``n`` is the Gauss node count per integration piece.
    """

    d: int
    rel_step: float = 1.0 / 64.0
    n: int = 48

    def __post_init__(self):
        if self.d < 1:
            raise DomainError("order d/2 must be positive")
        if not 0 < self.rel_step < 0.5:
            raise DomainError("rel_step must lie in (0, 1/2)")

    @property
    def order(self) -> float:
        return self.d / 2.0

    @property
    def m(self) -> int:
        return self.d // 2

    @property
    def even(self) -> bool:
        return self.d % 2 == 0


def _minus_D_power(h, t, q: int, rel_step: float):
    """``(-D)^q h`` at ``t`` with ``D = d/d(t^2)``, by a centred stencil in ``t^2``."""
    u0 = t * t
    du = rel_step * u0
    offs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) if q > 1 else STENCIL
    w = fd_weights(offs, q)
    uu = u0[:, None] + du[:, None] * offs
    vals = np.asarray(h(np.sqrt(uu).ravel())).reshape(uu.shape)
    return (-1.0) ** q * (vals @ w) / du**q


def ek_derivative(spec: FractionalOpSpec, f, t, *, t_max=None, breaks=None) -> np.ndarray:
    """Fractional derivative of order ``d/2`` in ``t^2`` at the points ``t > 0``.

    Even ``d``: ``(-D)^{d/2} f``.  Odd ``d``:
    ``t^{2-d+2m} (-D)^{m+1} t^d g`` with ``g = I^{1-d/2+m} t^{-2m-2} f``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise DomainError("the derivative is evaluated at t > 0")
    if spec.even:
        return _minus_D_power(f, t, spec.m, spec.rel_step)

    m = spec.m
    d = spec.d
    alpha = 1.0 - d / 2.0 + m

    def scaled(s):
        return f(s) * np.asarray(s, dtype=float) ** (-2 * m - 2)

    if isinstance(f, RadialProfile):
        t_max, breaks = f.t_max, f.breaks[1:-1]

    def h(tt):
        return tt**d * ek_integral(alpha, scaled, tt, t_max=t_max, breaks=breaks, n=spec.n)

    return t ** (2 - d + 2 * m) * _minus_D_power(h, t, m + 1, spec.rel_step)


def extrapolate_to_zero(t, values, degree: int = 2, in_t2: bool = True):
    """Polynomial fit in ``t^2`` (or ``t``); returns ``(value_at_0, rms_residual)``."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    x = t * t if in_t2 else t
    deg = min(degree, x.size - 1)
    coef, res, *_ = np.polyfit(x, values, deg, full=True)
    rms = float(np.sqrt(res[0] / x.size)) if res.size else 0.0
    return float(coef[-1]), rms
