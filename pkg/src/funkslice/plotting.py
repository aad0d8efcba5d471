"""Static figures for profiles, reconstructions, error curves and verification reports."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fields import GridField  # noqa: E402
from .storage import read_table  # noqa: E402
from .transforms import SectionProfile  # noqa: E402


def plot_profile(profile: SectionProfile, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    if len(profile.lattice.shape) == 2:
        ang = np.degrees(profile.lattice.angles())
        off = profile.lattice.offsets()
        im = ax.pcolormesh(off, ang, profile.values, shading="nearest", cmap="viridis")
        ax.set_xlabel("offset")
        ax.set_ylabel("normal angle [deg]")
    else:
        im = None
        ax.plot(profile.values, ".")
        ax.set_xlabel("plane index")
    if im is not None:
        fig.colorbar(im, ax=ax)
    ax.set_title(f"{profile.transform} profile, {profile.lattice.kind}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_field(field: GridField, path, title="reconstruction", truth=None):
    ncols = 2 if truth is not None else 1
    fig, axes = plt.subplots(1, ncols, figsize=(5 * ncols, 3.2), squeeze=False)
    extent = [0, 360, 180, 0]
    im = axes[0, 0].imshow(field.values, extent=extent, aspect="auto", cmap="RdBu_r")
    axes[0, 0].set_title(title)
    fig.colorbar(im, ax=axes[0, 0])
    if truth is not None:
        im2 = axes[0, 1].imshow(field.values - truth, extent=extent, aspect="auto", cmap="RdBu_r")
        axes[0, 1].set_title("error")
        fig.colorbar(im2, ax=axes[0, 1])
    for ax in axes[0]:
        ax.set_xlabel("longitude [deg]")
        ax.set_ylabel("colatitude [deg]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(levels, errors, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(levels, errors, "o-")
    ax.set_xlabel("lattice size per axis")
    ax.set_ylabel("relative L2 error")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_report(report: dict, path):
    checks = report["checks"]
    names = [c["name"] for c in checks]
    ratio = [max(c["residual"], 1e-300) / c["tolerance"] for c in checks]
    colors = ["tab:green" if c["passed"] else "tab:red" for c in checks]
    fig, ax = plt.subplots(figsize=(6, 0.35 * len(names) + 1))
    ax.barh(names, ratio, color=colors)
    ax.set_xscale("log")
    ax.axvline(1.0, color="k", lw=0.8)
    ax.set_xlabel("residual / tolerance")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_all(cfg, outdir) -> list:
    """Draw every figure whose input file exists; returns the written paths."""
    from .pipelines import RECON_TARGET, symmetrized

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    prof_path = cfg.path("profile", "profile.csv")
    if prof_path.exists():
        p = outdir / "profile.png"
        plot_profile(SectionProfile.load(prof_path), p)
        written.append(p)
    rec_path = cfg.path("reconstruction", "reconstruction.csv")
    if rec_path.exists():
        header, _ = read_table(rec_path)
        if header.get("kind") == "field":
            field = GridField.load(rec_path)
            truth = None
            if cfg.scenario in RECON_TARGET:
                f = symmetrized(cfg.sphere_phantom().build(), RECON_TARGET[cfg.scenario], np.asarray(cfg.a, float), cfg.k)
                truth = f(field.points()[0])
            p = outdir / "reconstruction.png"
            plot_field(field, p, truth=truth)
            written.append(p)
    met_path = cfg.path("metrics", "metrics.json")
    if met_path.exists():
        conv = json.loads(met_path.read_text()).get("convergence")
        if conv:
            p = outdir / "convergence.png"
            plot_convergence(conv["levels"], conv["relative_l2"], p)
            written.append(p)
    rep_path = cfg.path("report", "report.json")
    if rep_path.exists():
        p = outdir / "report.png"
        plot_report(json.loads(rep_path.read_text()), p)
        written.append(p)
    return written
