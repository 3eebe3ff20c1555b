"""Matplotlib renders of PSFs, SFR curves and region reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrology import MTFReport, REGIONS
from .psf import PSF
from .sfr import SFRCurve, mtf50
from .errors import NoCrossingError


def plot_psf_panel(psfs: list[PSF], path, gamma: float = 0.5) -> None:
    """Side-by-side intensity maps, one panel per PSF."""
    n = len(psfs)
    fig, axes = plt.subplots(1, n, figsize=(4 * n, 4), squeeze=False)
    for ax, p in zip(axes[0], psfs):
        img = p.intensity / p.intensity.max() if p.intensity.max() > 0 else p.intensity
        half = p.size / 2 * p.pixel_pitch_um
        ax.imshow(np.power(img, gamma), cmap="inferno",
                  extent=(-half, half, half, -half))
        ax.set_title(f"{p.wavelength_nm:.0f} nm, "
                     f"({p.field_deg[0]:+.2f}, {p.field_deg[1]:+.2f}) deg")
        ax.set_xlabel("um")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sfr_curves(curves: list[tuple[str, SFRCurve]], path) -> None:
    """SFR curves with the 0.5 reference line and MTF50 markers."""
    fig, ax = plt.subplots(figsize=(7, 5))
    if not curves:
        ax.text(0.5, 0.5, "no curves to plot", ha="center", va="center",
                transform=ax.transAxes, color="tab:red")
    for label, curve in curves:
        (line,) = ax.plot(curve.frequencies, curve.response, label=label)
        try:
            f50 = mtf50(curve)
            ax.plot([f50], [0.5], "o", color=line.get_color(), ms=5)
        except NoCrossingError:
            pass
    ax.axhline(0.5, color="gray", lw=0.8, ls="--")
    ax.set_xlim(0, 1.0)
    ax.set_ylim(0, 1.1)
    ax.set_xlabel("spatial frequency (cy/px)")
    ax.set_ylabel("SFR")
    ax.grid(alpha=0.3)
    if curves:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_region_bars(report: MTFReport, path) -> None:
    """Per-region mean MTF50 before/after as a grouped bar chart."""
    fig, ax = plt.subplots(figsize=(6, 4))
    regions = [r for r in REGIONS if r in report.region_means_before]
    if not regions:
        ax.text(0.5, 0.5, "empty report: no valid ROI measurements",
                ha="center", va="center", transform=ax.transAxes, color="tab:red")
    else:
        x = np.arange(len(regions))
        before = [report.region_means_before[r] for r in regions]
        after = [report.region_means_after[r] for r in regions]
        ax.bar(x - 0.18, before, width=0.36, label="before")
        ax.bar(x + 0.18, after, width=0.36, label="after")
        ax.set_xticks(x, regions)
        ax.legend()
    ax.set_ylabel("mean MTF50 (cy/px)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
