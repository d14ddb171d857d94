"""Diagnostics: representation-error sweeps, singular-subspace maps, SSIM.

The approximation-error operations quantify how well a model's k-space basis
can represent the transform of a point source restricted to the central band
[-1/(2dx), 1/(2dx)); the subspace operations characterize which spatial
locations are associated with small singular values of a sampling operator.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .operators import ModelSpec, bspline

__all__ = [
    "ApproxErrorSpec",
    "SubspaceMap",
    "approx_error",
    "rms_approx_error",
    "rms_error_contour",
    "mean_singular_value_index",
    "near_nullspace_projection",
    "ssim",
    "ssim_map",
    "convergence_maps",
    "axis_artifact_energy",
]


@dataclass(frozen=True)
class ApproxErrorSpec:
    """Configuration of the quadrature least-squares error evaluation.

    The fit interval is the central band of width 1/dx. ``quadrature_nodes``
    is the starting node count; results are refined by doubling until two
    consecutive node counts agree within ``refine_tol_pp`` percentage points
    or ``refine_cap`` is reached.
    """

    model: ModelSpec
    quadrature_nodes: int = 4096
    refine_cap: int = 32768
    refine_tol_pp: float = 0.05

    def __post_init__(self):
        if self.model.dims != 1:
            raise ValueError("approximation-error sweeps are one-dimensional")
        if self.quadrature_nodes < 64:
            raise ValueError("quadrature_nodes must be at least 64")
        if self.refine_cap < self.quadrature_nodes:
            raise ValueError("refine_cap must be >= quadrature_nodes")


@dataclass
class SubspaceMap:
    """Per-location mean singular value index plus the singular spectrum."""

    mu: np.ndarray
    singular_values: np.ndarray


@functools.lru_cache(maxsize=64)
def _orthobasis(model: ModelSpec, Q: int):
    """Orthonormal basis (quadrature-node samples) of the model's k-space span.

    Returns (nodes, U). For the k-space model the basis includes every spline
    position whose support intersects the fit band, not only the model's own
    coefficient range; a hard truncation at the coefficient range would add a
    band-edge floor to the error that says nothing about interior capacity.
    Columns identically zero on the band are dropped, as are singular
    directions below 1e-12 of the largest.
    """
    dx = model.dx
    nodes = np.linspace(-0.5 / dx, 0.5 / dx, Q, endpoint=False)
    if model.kind == "voxel":
        n = np.arange(-model.N // 2, model.N // 2)
        B = np.exp(-2j * np.pi * np.outer(nodes, n * dx))
    else:
        L = model.L
        dk = model.dk
        ext = (model.P + 3) // 2
        ells = np.arange(-L // 2 - ext, L // 2 + ext)
        B = bspline(model.P, (nodes[:, None] - ells[None, :] * dk) / dk)
        B = B[:, np.any(B != 0, axis=0)]
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    keep = s > s[0] * 1e-12
    U = U[:, keep]
    U.setflags(write=False)
    nodes.setflags(write=False)
    return nodes, U


def _errors_at(model: ModelSpec, Q: int, x0s: np.ndarray) -> np.ndarray:
    """Percent residual of the least-squares fit to e^{-i2pi k x0} at Q nodes."""
    nodes, U = _orthobasis(model, Q)
    F = np.exp(-2j * np.pi * np.outer(nodes, x0s))
    proj = U.conj().T @ F
    sig2 = np.sum(np.abs(F) ** 2, axis=0)
    res2 = sig2 - np.sum(np.abs(proj) ** 2, axis=0)
    return 100.0 * np.sqrt(np.maximum(res2, 0.0) / sig2)


def _refine(eval_fn, spec: ApproxErrorSpec):
    """Double the node count until the scalar result stabilizes."""
    Q = spec.quadrature_nodes
    val = eval_fn(Q)
    while 2 * Q <= spec.refine_cap:
        val2 = eval_fn(2 * Q)
        if abs(val2 - val) < spec.refine_tol_pp:
            return val2
        Q *= 2
        val = val2
    return val


def approx_error(x0: float, spec: ApproxErrorSpec) -> float:
    """Best-case relative representation error (percent) for a source at x0."""
    x0s = np.atleast_1d(np.asarray(x0, dtype=float))

    def at(Q):
        return float(_errors_at(spec.model, Q, x0s)[0])

    return _refine(at, spec)


def rms_approx_error(spec: ApproxErrorSpec, x0_range=None, num_x0: int = 513) -> float:
    """RMS of approx_error over a uniform x0 grid with trapezoid weights.

    The default range spans the nominal field of view, endpoints included.
    """
    model = spec.model
    if x0_range is None:
        half = model.N * model.dx / 2.0
        x0_range = (-half, half)
    if num_x0 < 2:
        raise ValueError("num_x0 must be at least 2")
    x0s = np.linspace(x0_range[0], x0_range[1], num_x0)
    w = np.ones(num_x0)
    w[0] = w[-1] = 0.5

    def at(Q):
        e = _errors_at(model, Q, x0s)
        return float(np.sqrt(np.sum(w * e ** 2) / np.sum(w)))

    return _refine(at, spec)


def error_sweep(spec: ApproxErrorSpec, x0_values: np.ndarray) -> np.ndarray:
    """approx_error evaluated at many x0 with a single refinement decision."""
    x0s = np.asarray(x0_values, dtype=float).ravel()

    def at(Q):
        return _errors_at(spec.model, Q, x0s)

    Q = spec.quadrature_nodes
    vals = at(Q)
    while 2 * Q <= spec.refine_cap:
        vals2 = at(2 * Q)
        if np.max(np.abs(vals2 - vals)) < spec.refine_tol_pp:
            return vals2
        Q *= 2
        vals = vals2
    return vals


def rms_error_contour(P_values, rho_values, base: ModelSpec,
                      num_x0: int = 513) -> np.ndarray:
    """Matrix of rms_approx_error, rows over P and columns over rho."""
    out = np.zeros((len(P_values), len(rho_values)))
    for i, P in enumerate(P_values):
        for j, rho in enumerate(rho_values):
            model = ModelSpec(kind="kspace", dims=1, N=base.N, dx=base.dx,
                              P=int(P), rho=float(rho))
            out[i, j] = rms_approx_error(ApproxErrorSpec(model=model),
                                         num_x0=num_x0)
    return out


_ENTRY_GUARD = int(1e7)


def _dense_matrix(op) -> np.ndarray:
    if op.M * op.ncols > _ENTRY_GUARD:
        raise MemoryError(
            f"operator too large for dense spectral analysis "
            f"({op.M} x {op.ncols} entries exceeds {_ENTRY_GUARD})")
    if hasattr(op, "to_dense"):
        return np.asarray(op.to_dense())
    cols = np.zeros((op.M, op.ncols), dtype=complex)
    e = np.zeros(op.ncols, dtype=complex)
    for j in range(op.ncols):
        e[j] = 1.0
        cols[:, j] = op.apply(e)
        e[j] = 0.0
    return cols


def _gram_eig_desc(A: np.ndarray):
    """Eigendecomposition of A^H A sorted by descending singular value."""
    gram = A.conj().T @ A
    w, V = np.linalg.eigh(gram)
    w = np.clip(w, 0.0, None)
    order = np.argsort(w)[::-1]
    return np.sqrt(w[order]), V[:, order]


def mean_singular_value_index(op, spec: ModelSpec) -> SubspaceMap:
    """Weighted mean index of the singular vectors touching each location.

    Right singular vectors are obtained from the operator's Gram matrix; for
    the k-space model they are transformed to spatial locations by the
    centered unitary inverse DFT before the index average. Low mu means the
    location is mostly seen by the best-conditioned directions.
    """
    A = _dense_matrix(op)
    sigma, V = _gram_eig_desc(A)
    K = min(op.M, op.ncols)
    sigma = sigma[:K]
    V = V[:, :K]

    if spec.kind == "kspace":
        grid = (spec.L,) * spec.dims
        axes = tuple(range(1, spec.dims + 1))
        cube = V.T.reshape((K,) + grid)
        cube = np.fft.ifftshift(cube, axes=axes)
        cube = np.fft.ifftn(cube, axes=axes, norm="ortho")
        cube = np.fft.fftshift(cube, axes=axes)
        V = cube.reshape(K, -1).T
        grid_shape = grid
    else:
        grid_shape = (spec.N,) * spec.dims

    weights = np.abs(V)
    denom = weights.sum(axis=1)
    idx = np.arange(1, K + 1, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = (weights @ idx) / denom
    mu = np.where(denom > 0, mu, 1.0)
    return SubspaceMap(mu=mu.reshape(grid_shape), singular_values=sigma)


def near_nullspace_projection(op, coefficients: np.ndarray,
                              fraction: float) -> np.ndarray:
    """Project onto right singular vectors with sigma < fraction * sigma_max.

    For wide operators (rows < columns) the kept directions all have
    sigma >= fraction * sigma_max > 0, so they are recovered from the row-side
    Gram as A^H u_i / sigma_i and the projection is formed by complement;
    this avoids the full column-side eigendecomposition.
    """
    if fraction < 0:
        raise ValueError("fraction must be nonnegative")
    A = _dense_matrix(op)
    c = np.asarray(coefficients, dtype=complex)
    flat = c.ravel()
    if flat.size != A.shape[1]:
        raise ValueError("coefficient length does not match operator columns")
    if A.shape[0] < A.shape[1]:
        sigma, U = _gram_eig_desc(A.conj().T)
        thresh = fraction * (sigma[0] if sigma.size else 0.0)
        if thresh <= 0:
            return np.zeros_like(c)
        keep = sigma >= thresh
        Uk = U[:, keep]
        Vk = A.conj().T @ (Uk / sigma[keep])
        proj = flat - Vk @ (Vk.conj().T @ flat)
        return proj.reshape(c.shape)
    sigma, V = _gram_eig_desc(A)
    sel = sigma < fraction * sigma[0]
    Vs = V[:, sel]
    proj = Vs @ (Vs.conj().T @ flat)
    return proj.reshape(c.shape)


def _gauss_local_stats(img: np.ndarray, window: int):
    radius = (window - 1) // 2
    sigma = 1.5
    return gaussian_filter(img, sigma=sigma, truncate=radius / sigma,
                           mode="reflect")


def ssim_map(reference: np.ndarray, image: np.ndarray, window: int = 15,
             dynamic_range=None) -> np.ndarray:
    """Per-pixel structural similarity of magnitude images.

    Local statistics use a Gaussian-weighted window (sigma 1.5, radius
    (window-1)//2). ``dynamic_range`` defaults to the reference's maximum
    magnitude; pass it explicitly to compare several images on a fixed scale.
    """
    a = np.abs(np.asarray(reference, dtype=complex)).astype(float)
    b = np.abs(np.asarray(image, dtype=complex)).astype(float)
    if a.shape != b.shape:
        raise ValueError("images must have the same shape")
    R = float(np.max(a)) if dynamic_range is None else float(dynamic_range)
    if R <= 0:
        R = 1.0
    c1 = (0.01 * R) ** 2
    c2 = (0.03 * R) ** 2
    mu_a = _gauss_local_stats(a, window)
    mu_b = _gauss_local_stats(b, window)
    var_a = _gauss_local_stats(a * a, window) - mu_a ** 2
    var_b = _gauss_local_stats(b * b, window) - mu_b ** 2
    cov = _gauss_local_stats(a * b, window) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(reference: np.ndarray, image: np.ndarray, window: int = 15,
         dynamic_range=None) -> float:
    """Mean structural similarity; 1.0 only for identical magnitude images."""
    return float(np.mean(ssim_map(reference, image, window, dynamic_range)))


def convergence_maps(iterate_snapshots, reference_image, times=None,
                     threshold: float = 0.95, window: int = 15):
    """Per-pixel iteration (and cumulative seconds) to reach stable local SSIM.

    A pixel converges at the first snapshot index t where its local SSIM
    against the reference is >= threshold for t and every later snapshot.
    Returned maps use 1-based iteration counts; pixels that never converge
    get inf. ``times`` is the cumulative-seconds list aligned with the
    snapshots; without it the time map repeats the iteration map.
    """
    snapshots = list(iterate_snapshots)
    if not snapshots:
        raise ValueError("need at least one snapshot")
    ref = np.asarray(reference_image)
    R = float(np.max(np.abs(ref)))
    ok = np.stack([ssim_map(ref, s, window, dynamic_range=R) >= threshold
                   for s in snapshots])
    T = ok.shape[0]
    stays = np.empty_like(ok)
    stays[T - 1] = ok[T - 1]
    for t in range(T - 2, -1, -1):
        stays[t] = ok[t] & stays[t + 1]
    any_stay = stays.any(axis=0)
    first = np.argmax(stays, axis=0)
    iters_map = np.where(any_stay, first + 1.0, np.inf)
    if times is None:
        time_map = iters_map.copy()
    else:
        times = np.asarray(times, dtype=float)
        if times.shape[0] != T:
            raise ValueError("times must align with iterate_snapshots")
        safe = np.where(any_stay, first, 0)
        time_map = np.where(any_stay, times[safe], np.inf)
    return iters_map, time_map


def axis_artifact_energy(kspace_image: np.ndarray, band_width: int = 3) -> float:
    """Energy fraction in the central horizontal+vertical k-space bands.

    The input is any 2D k-space image (typically a reconstruction's spectrum);
    a ratio near 1 means its energy is concentrated on the two axes through
    the center.
    """
    img = np.asarray(kspace_image)
    if img.ndim != 2:
        raise ValueError("expected a 2D k-space image")
    total = float(np.sum(np.abs(img) ** 2))
    if total == 0:
        return 0.0
    half = band_width // 2
    rows, cols = img.shape
    rc, cc = rows // 2, cols // 2
    mask = np.zeros(img.shape, dtype=bool)
    mask[max(rc - half, 0):rc + half + 1, :] = True
    mask[:, max(cc - half, 0):cc + half + 1] = True
    band = float(np.sum(np.abs(img[mask]) ** 2))
    return band / total
