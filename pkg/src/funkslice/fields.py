"""Scalar fields on the sphere: analytic phantoms, symmetry classes and grid-backed fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainError, lat_lon_grid
from .mobius import CenterContext, involution_W, parity_parts, reflect_hyperplane
from .storage import read_table, write_table

SYMMETRIES = ("generic", "a-perp-even", "a-perp-odd", "W-even", "W-odd")


@dataclass(frozen=True, eq=False)
class GaussianSum:
    """``f(x) = sum_i A_i exp(-|x - c_i|^2 / w_i^2)``, smooth on all of R^{n+1}."""

    centers: np.ndarray
    widths: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        w = np.atleast_1d(np.asarray(self.widths, dtype=float))
        amp = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        if not (len(c) == len(w) == len(amp)):
            raise DomainError("centers, widths and amplitudes differ in length")
        if np.any(w <= 0):
            raise DomainError("widths must be positive")
        for name, arr in (("centers", c), ("widths", w), ("amplitudes", amp)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d2 = np.sum((x[..., None, :] - self.centers) ** 2, axis=-1)
        return np.exp(-d2 / self.widths**2) @ self.amplitudes

    @classmethod
    def random(cls, dim: int, count: int, rng: np.random.Generator, width=(0.5, 1.2), amplitude: float = 1.0):
        c = rng.standard_normal((count, dim))
        c /= np.linalg.norm(c, axis=1, keepdims=True)
        w = rng.uniform(*width, size=count)
        amp = amplitude * rng.uniform(0.5, 1.5, size=count) * rng.choice([-1.0, 1.0], size=count)
        return cls(c, w, amp)

    def to_dict(self) -> dict:
        return {
            "kind": "gaussian-sum",
            "centers": self.centers.tolist(),
            "widths": self.widths.tolist(),
            "amplitudes": self.amplitudes.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianSum":
        if d.get("kind", "gaussian-sum") != "gaussian-sum":
            raise DomainError(f"unknown phantom kind {d.get('kind')!r}")
        return cls(d["centers"], d["widths"], d["amplitudes"])


def symmetrized(f, symmetry: str, a=None, k: int = 2):
    """Project ``f`` onto one of the symmetry classes in :data:`SYMMETRIES`."""
    if symmetry == "generic":
        return f
    if symmetry in ("a-perp-even", "a-perp-odd"):
        if a is None:
            raise DomainError("parity classes need a center a")
        plus, minus = parity_parts(a, f)
        return plus if symmetry == "a-perp-even" else minus
    if symmetry in ("W-even", "W-odd"):
        ctx = CenterContext(np.asarray(a, dtype=float), k)
        if not ctx.exterior:
            raise DomainError("W symmetry classes need |a| > 1")
        Wf = involution_W(ctx, f)
        sign = 1.0 if symmetry == "W-even" else -1.0

        def h(x):
            return 0.5 * (f(x) + sign * Wf(x))

        return h
    raise DomainError(f"unknown symmetry {symmetry!r}; expected one of {SYMMETRIES}")


def symmetry_residual(f, symmetry: str, points, a=None, k: int = 2) -> float:
    """Sup-norm violation of the defining relation of ``symmetry`` on ``points``."""
    points = np.asarray(points, dtype=float)
    v = f(points)
    if symmetry == "generic":
        return 0.0
    if symmetry in ("a-perp-even", "a-perp-odd"):
        sign = 1.0 if symmetry == "a-perp-even" else -1.0
        return float(np.max(np.abs(v - sign * f(reflect_hyperplane(a, points)))))
    ctx = CenterContext(np.asarray(a, dtype=float), k)
    sign = 1.0 if symmetry == "W-even" else -1.0
    return float(np.max(np.abs(v - sign * involution_W(ctx, f)(points))))


@dataclass(frozen=True)
class PhantomSpec:
    """A Gaussian-sum phantom on S^n projected onto a symmetry class."""

    base: GaussianSum
    symmetry: str = "generic"
    a: tuple | None = None
    k: int = 2

    def build(self):
        a = None if self.a is None else np.asarray(self.a, dtype=float)
        return symmetrized(self.base, self.symmetry, a, self.k)

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "symmetry": self.symmetry,
            "a": None if self.a is None else list(self.a),
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        if "base" in d:
            base = GaussianSum.from_dict(d["base"])
        else:
            rng = np.random.default_rng(d.get("seed", 0))
            base = GaussianSum.random(d["dim"], d.get("count", 4), rng)
        sym = d.get("symmetry", "generic")
        if sym not in SYMMETRIES:
            raise DomainError(f"unknown symmetry {sym!r}")
        a = d.get("a")
        return cls(base, sym, None if a is None else tuple(float(v) for v in a), int(d.get("k", 2)))


BALL_KINDS = ("unit", "dome", "bump", "gaussian-sum")


@dataclass(frozen=True, eq=False)
class BallPhantom:
    """Density on the unit ball of R^m for Radon-John experiments.

    ``unit`` is the indicator, ``dome`` is ``sqrt(1 - |y|^2)``, ``bump`` is
    ``exp(-|y|^2 / w^2) (1 - |y|^2)^3`` and ``gaussian-sum`` multiplies a
    :class:`GaussianSum` by ``(1 - |y|^2)^3``.
    """

    kind: str
    dim: int = 2
    width: float = 0.4
    base: GaussianSum | None = None

    def __post_init__(self):
        if self.kind not in BALL_KINDS:
            raise DomainError(f"unknown ball phantom {self.kind!r}")
        if self.kind == "gaussian-sum" and (self.base is None or self.base.dim != self.dim):
            raise DomainError("gaussian-sum ball phantom needs a base of matching dimension")

    @property
    def radial(self) -> bool:
        return self.kind != "gaussian-sum"

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        r2 = np.sum(y * y, axis=-1)
        inside = r2 < 1.0
        gap = np.where(inside, 1.0 - r2, 0.0)
        if self.kind == "unit":
            return inside.astype(float)
        if self.kind == "dome":
            return np.sqrt(gap)
        if self.kind == "bump":
            return np.exp(-r2 / self.width**2) * gap**3
        return self.base(y) * gap**3

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dim": self.dim, "width": self.width}
        if self.base is not None:
            d["base"] = self.base.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BallPhantom":
        base = None
        if d.get("kind") == "gaussian-sum":
            if "base" in d:
                base = GaussianSum.from_dict(d["base"])
            else:
                base = GaussianSum.random(int(d.get("dim", 2)), int(d.get("count", 3)), np.random.default_rng(d.get("seed", 0)), (0.3, 0.6))
        return cls(d["kind"], int(d.get("dim", 2)), float(d.get("width", 0.4)), base)


# --------------------------------------------------------------------------
# grid-backed fields on S^2
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridField:
    """Values on a cell-centred latitude-longitude grid of S^2, bilinearly interpolated.

    ``nlon`` must be even so that rows across a pole are available exactly.
    """

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] % 2:
            raise DomainError("grid field needs shape (nlat, nlon) with even nlon")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        nlat, nlon = v.shape
        half = nlon // 2
        # one extra row across each pole, one extra column for wrap-around
        top = np.roll(v[:1], half, axis=1)
        bot = np.roll(v[-1:], half, axis=1)
        padded = np.vstack([top, v, bot])
        padded = np.hstack([padded, padded[:, :1]])
        object.__setattr__(self, "_padded", padded)

    @property
    def shape(self):
        return self.values.shape

    def points(self):
        pts, w, _, _ = lat_lon_grid(*self.shape)
        return pts, w

    @classmethod
    def from_function(cls, f, nlat: int, nlon: int, meta: dict | None = None) -> "GridField":
        pts, _, _, _ = lat_lon_grid(nlat, nlon)
        return cls(np.asarray(f(pts), dtype=float), meta or {})

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        nlat, nlon = self.shape
        theta = np.arccos(np.clip(x[..., 2] / np.linalg.norm(x, axis=-1), -1.0, 1.0))
        phi = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2.0 * np.pi)
        fi = theta / (np.pi / nlat) + 0.5  # row in the padded array
        fj = phi / (2.0 * np.pi / nlon)
        i0 = np.clip(np.floor(fi).astype(int), 0, nlat)
        j0 = np.clip(np.floor(fj).astype(int), 0, nlon - 1)
        di, dj = fi - i0, fj - j0
        P = self._padded
        return (
            (1 - di) * (1 - dj) * P[i0, j0]
            + (1 - di) * dj * P[i0, j0 + 1]
            + di * (1 - dj) * P[i0 + 1, j0]
            + di * dj * P[i0 + 1, j0 + 1]
        )

    def save(self, path):
        nlat, nlon = self.shape
        ii, jj = np.meshgrid(np.arange(nlat), np.arange(nlon), indexing="ij")
        header = {"kind": "field", "grid": {"type": "lat-lon", "nlat": nlat, "nlon": nlon}, "meta": self.meta}
        write_table(path, header, {"lat_index": ii.ravel(), "lon_index": jj.ravel(), "value": self.values.ravel()})

    @classmethod
    def load(cls, path) -> "GridField":
        header, cols = read_table(path)
        if header.get("kind") != "field":
            raise DomainError(f"{path} is not a field file")
        g = header["grid"]
        vals = np.empty((g["nlat"], g["nlon"]))
        vals[cols["lat_index"], cols["lon_index"]] = cols["value"]
        return cls(vals, header.get("meta", {}))


def relative_l2_error(approx, exact, weights) -> float:
    approx, exact, weights = (np.asarray(v, dtype=float) for v in (approx, exact, weights))
    return float(np.sqrt(np.sum(weights * (approx - exact) ** 2) / np.sum(weights * exact**2)))
