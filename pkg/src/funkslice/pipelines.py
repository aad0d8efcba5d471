"""Experiment configuration and the phantom -> forward -> invert pipelines driven by the CLI."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .fields import BallPhantom, GridField, PhantomSpec, relative_l2_error, symmetrized, symmetry_residual
from .geometry import SectionGrid, lat_lon_grid
from .inversion import InversionSettings, funk_invert, line_data_from_profile, radon_invert, slice_invert_points
from .mobius import CenterContext
from .storage import read_table, write_table
from .transforms import PlaneLattice, SectionProfile, profile_sweep

SCENARIOS = ("funk", "slice", "radon", "verify")
SCENARIO_TRANSFORM = {"funk": ("F", "pullback-grid"), "slice": ("Pi", "parallel-grid"), "radon": ("R", "line-grid")}
RECON_TARGET = {"funk": "W-even", "slice": "a-perp-even"}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class AccuracyFailure(ArithmeticError):
    """A measured error exceeded its configured tolerance."""


@dataclass
class ExperimentConfig:
    scenario: str
    n: int = 2
    k: int = 2
    a: list = field(default_factory=lambda: [0.0, 0.0, 2.0])
    ell: int | None = None
    seed: int = 0
    phantom: dict = field(default_factory=dict)
    lattice: dict = field(default_factory=dict)
    section_size: int | None = None
    grid: dict = field(default_factory=lambda: {"nlat": 64, "nlon": 128})
    points: dict = field(default_factory=lambda: {"radii": 5, "angles": 5, "max_radius": 0.95})
    inversion: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    study: dict = field(default_factory=dict)
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "scenario" not in d:
            raise ConfigError("config needs a scenario")
        cfg = cls(**d, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d, path.parent)

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if self.scenario == "radon":
            return
        if len(self.a) != self.n + 1:
            raise ConfigError(f"center a must have n + 1 = {self.n + 1} coordinates")
        if not 1 < self.k <= self.n:
            raise ConfigError(f"need 1 < k <= n, got k={self.k}, n={self.n}")
        if self.ell is not None and not self.k < self.ell <= self.n:
            raise ConfigError(f"need k < l <= n, got l={self.ell}")
        norm = float(np.linalg.norm(self.a))
        if self.scenario in ("funk", "verify") and norm <= 1.0:
            raise ConfigError(f"scenario {self.scenario} needs |a| > 1, got {norm:.6g}")
        if self.scenario == "slice" and norm == 0.0:
            raise ConfigError("slice scenario needs a nonzero direction a")
        if self.scenario in ("funk", "slice") and (self.n, self.k) != (2, 2):
            raise ConfigError("grid pipelines are implemented for n = 2, k = 2")

    def path(self, key: str, default: str) -> Path:
        p = Path(self.paths.get(key, default))
        return p if p.is_absolute() else Path(self.base_dir) / p

    # derived objects

    def context(self) -> CenterContext:
        return CenterContext(np.asarray(self.a, dtype=float), self.k)

    def settings(self) -> InversionSettings:
        try:
            return InversionSettings(**self.inversion)
        except TypeError as exc:
            raise ConfigError(f"bad inversion settings: {exc}") from exc

    def section_grid(self) -> SectionGrid:
        return SectionGrid(self.section_size)

    def plane_lattice(self) -> PlaneLattice:
        if self.scenario == "verify":
            raise ConfigError("verify has no lattice")
        kind = SCENARIO_TRANSFORM[self.scenario][1]
        d = {"kind": kind, "n_angle": 64, "n_offset": 64, **self.lattice}
        if d["kind"] != kind:
            raise ConfigError(f"scenario {self.scenario} uses a {kind} lattice")
        try:
            return PlaneLattice.from_dict(d)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def sphere_phantom(self) -> PhantomSpec:
        d = {"dim": self.n + 1, "seed": self.seed, "a": self.a, "k": self.k, **self.phantom}
        try:
            spec = PhantomSpec.from_dict(d)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad phantom: {exc}") from exc
        if spec.base.dim != self.n + 1:
            raise ConfigError("phantom dimension does not match n")
        if spec.symmetry.startswith("W") and np.linalg.norm(self.a) <= 1.0:
            raise ConfigError("W symmetry classes need |a| > 1")
        return spec

    def ball_phantom(self) -> BallPhantom:
        d = {"kind": "dome", "dim": 2, "seed": self.seed, **self.phantom}
        try:
            ph = BallPhantom.from_dict(d)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad ball phantom: {exc}") from exc
        if ph.dim != 2:
            raise ConfigError("grid-based Radon-John pipelines run in the plane (dim = 2)")
        return ph


# --------------------------------------------------------------------------
# pipelines
# --------------------------------------------------------------------------


def disk_points(radii: int, angles: int, max_radius: float) -> np.ndarray:
    """Polar grid of ``radii * angles`` points in the disc of radius ``max_radius``."""
    r = max_radius * (np.arange(radii) + 1.0) / radii
    th = 2.0 * np.pi * (np.arange(angles) + 0.5) / angles
    R, T = np.meshgrid(r, th, indexing="ij")
    return np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])


def make_phantom(cfg: ExperimentConfig):
    """Sampled phantom: a :class:`GridField` on S^2, or disc samples for the radon scenario."""
    if cfg.scenario == "radon":
        ph = cfg.ball_phantom()
        pts = disk_points(**cfg.points)
        return {"points": pts, "values": ph(pts), "meta": {"phantom": ph.to_dict()}}
    spec = cfg.sphere_phantom()
    f = spec.build()
    nlat, nlon = cfg.grid["nlat"], cfg.grid["nlon"]
    pts, _, _, _ = lat_lon_grid(nlat, nlon)
    resid = symmetry_residual(f, spec.symmetry, pts.reshape(-1, 3), spec.a, spec.k)
    meta = {"phantom": spec.to_dict(), "symmetry": spec.symmetry, "symmetry_residual": resid}
    return GridField.from_function(f, nlat, nlon, meta)


def write_points(path, points, values, meta: dict):
    cols = {"point_index": np.arange(len(points))}
    for j in range(points.shape[1]):
        cols[f"x{j}"] = points[:, j]
    cols["value"] = np.asarray(values, dtype=float)
    write_table(path, {"kind": "points", "meta": meta}, cols)


def read_points(path):
    header, cols = read_table(path)
    xs = sorted((c for c in cols if c.startswith("x")), key=lambda c: int(c[1:]))
    return np.column_stack([cols[c] for c in xs]), cols["value"], header.get("meta", {})


def run_forward(cfg: ExperimentConfig, threads: int = 1) -> SectionProfile:
    transform, _ = SCENARIO_TRANSFORM.get(cfg.scenario, (None, None))
    if transform is None:
        raise ConfigError("forward needs a funk, slice or radon scenario")
    lattice = cfg.plane_lattice()
    if cfg.scenario == "radon":
        return profile_sweep(None, cfg.ball_phantom(), lattice, "R", threads=threads)
    f = cfg.sphere_phantom().build()
    return profile_sweep(cfg.context(), f, lattice, transform, cfg.section_grid(), threads)


def check_profile_matches(cfg: ExperimentConfig, profile: SectionProfile):
    transform, kind = SCENARIO_TRANSFORM[cfg.scenario]
    if profile.transform != transform or profile.lattice.kind != kind:
        raise ConfigError(f"profile holds {profile.transform} on {profile.lattice.kind}, scenario needs {transform} on {kind}")
    if cfg.scenario != "radon" and not profile.matches(cfg.n, cfg.k, cfg.a):
        raise ConfigError("profile (n, k, a) does not match the config")


def run_invert(cfg: ExperimentConfig, profile: SectionProfile, threads: int = 1):
    """Returns ``(reconstruction, metrics)``; the reconstruction is a GridField or a points dict."""
    check_profile_matches(cfg, profile)
    settings = cfg.settings()
    if cfg.scenario == "radon":
        ph = cfg.ball_phantom()
        pts = disk_points(**cfg.points)
        vals = radon_invert(line_data_from_profile(profile), pts, 1, settings)
        truth = ph(pts)
        metrics = {"max_abs_error": float(np.max(np.abs(vals - truth))), "points": len(pts)}
        return {"points": pts, "values": vals, "meta": {"settings": settings.to_dict()}}, metrics

    ctx = cfg.context()
    nlat, nlon = cfg.grid["nlat"], cfg.grid["nlon"]
    if cfg.scenario == "funk":
        rec = funk_invert(ctx, profile, nlat, nlon, settings, threads)
    else:
        pts, _, _, _ = lat_lon_grid(nlat, nlon)
        res = slice_invert_points(ctx, profile, pts.reshape(-1, 3), settings, threads)
        meta = {"source": "slice_invert", "a": list(ctx.a), "settings": settings.to_dict(), "equator_points": int(res.equator.sum())}
        rec = GridField(res.values.reshape(nlat, nlon), meta)
    spec = cfg.sphere_phantom()
    f = spec.build()
    target = symmetrized(f, RECON_TARGET[cfg.scenario], ctx.a, ctx.k)
    pts, w = rec.points()
    truth = target(pts)
    if cfg.scenario == "funk" and cfg.study.get("levels"):
        errs = funk_round_trip_errors(ctx, target, cfg.study["levels"], nlat, nlon, settings, threads)
        study = {"levels": list(cfg.study["levels"]), "relative_l2": errs}
    else:
        study = None
    metrics = {
        "target": RECON_TARGET[cfg.scenario],
        "phantom_symmetry": spec.symmetry,
        "relative_l2": relative_l2_error(rec.values, truth, w),
        "max_abs_error": float(np.max(np.abs(rec.values - truth))),
        "grid": [nlat, nlon],
    }
    if study:
        metrics["convergence"] = study
    return rec, metrics


def check_tolerances(cfg: ExperimentConfig, metrics: dict):
    for key, limit in cfg.tolerances.items():
        if key in metrics and metrics[key] > limit:
            raise AccuracyFailure(f"{key} = {metrics[key]:.3g} exceeds {limit:.3g}")


def funk_round_trip_errors(ctx, f, levels, nlat: int = 64, nlon: int = 128, settings=None, threads: int = 1) -> list:
    """Relative L2 error of ``funk_invert(F_a f)`` for square pullback lattices of the given sizes."""
    settings = settings or InversionSettings()
    pts, w, _, _ = lat_lon_grid(nlat, nlon)
    truth = f(pts)
    out = []
    for n in levels:
        prof = profile_sweep(ctx, f, PlaneLattice("pullback-grid", n, n), "F", threads=threads)
        rec = funk_invert(ctx, prof, nlat, nlon, settings, threads)
        out.append(relative_l2_error(rec.values, truth, w))
    return out
