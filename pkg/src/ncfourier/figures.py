"""Figure rendering for the command-line experiment drivers.

Every function writes a PNG next to the delimited output it illustrates and
closes its figure, so batch runs do not accumulate state. The Agg backend is
forced; no display is ever required.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "render_sweep",
    "render_contour",
    "render_images",
    "render_history",
    "render_map_panel",
]

_DPI = 150


def render_sweep(path, x0_values, series: dict) -> None:
    """Line plot of error-percent sweeps, one labeled curve per entry."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, errors in series.items():
        ax.plot(x0_values, errors, label=label, linewidth=1.2)
    ax.set_xlabel("point-source position x0")
    ax.set_ylabel("representation error (%)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_contour(path, rho_values, P_values, matrix) -> None:
    """Filled contour of RMS error over the (rho, P) plane."""
    matrix = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if matrix.shape[0] >= 2 and matrix.shape[1] >= 2:
        cs = ax.contourf(rho_values, P_values, matrix, levels=12,
                         cmap="viridis")
        fig.colorbar(cs, ax=ax, label="RMS error (%)")
    else:
        im = ax.imshow(matrix, aspect="auto", origin="lower", cmap="viridis",
                       extent=(min(rho_values), max(rho_values),
                               min(P_values), max(P_values)))
        fig.colorbar(im, ax=ax, label="RMS error (%)")
    ax.set_xlabel("oversampling rho")
    ax.set_ylabel("spline degree P")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_images(path, images: dict, log_scale: bool = False) -> None:
    """Row of magnitude images with shared sizing and individual color scales."""
    n = len(images)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.4), squeeze=False)
    for ax, (label, img) in zip(axes[0], images.items()):
        mag = np.abs(np.asarray(img))
        if log_scale:
            mag = np.log10(mag + 1e-12 * (mag.max() if mag.max() > 0 else 1.0))
        if mag.ndim == 1:
            ax.plot(mag)
        else:
            shown = ax.imshow(mag.T, origin="lower", cmap="gray")
            fig.colorbar(shown, ax=ax, fraction=0.046)
        ax.set_title(label, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_history(path, histories: dict) -> None:
    """Semilog cost-versus-iteration curves, one per solver run."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for label, costs in histories.items():
        ax.semilogy(np.arange(1, len(costs) + 1), costs, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective value")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_map_panel(path, maps: dict, cmap: str = "magma") -> None:
    """Scalar maps (mu, convergence counts) with infinities masked out."""
    n = len(maps)
    fig, axes = plt.subplots(1, n, figsize=(3.6 * n, 3.4), squeeze=False)
    for ax, (label, m) in zip(axes[0], maps.items()):
        arr = np.asarray(m, dtype=float).copy()
        arr[~np.isfinite(arr)] = np.nan
        shown = ax.imshow(arr.T, origin="lower", cmap=cmap)
        fig.colorbar(shown, ax=ax, fraction=0.046)
        ax.set_title(label, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
