"""Forward operators and kernel functions for both imaging models.

The voxel model expands the image in shifted voxel functions on an N-point
grid (spacing dx); its exact forward map is the dense matrix
``A[m,n] = exp(-i*2*pi*k_m.x_n)``, with a Kaiser-Bessel gridding approximation
and an exact FFT-based Toeplitz Gram for fast iterations. The k-space model
expands k-space itself in L uniformly shifted B-splines (spacing dk, degree
P); its forward map ``H[m,l] = bspline(P, (k_m - l*dk)/dk)`` is sparse with at
most ``(P+1)**dims`` nonzeros per row.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
import scipy.sparse as sp
from scipy.special import i0 as bessel_i0

from .trajectory import Trajectory

__all__ = [
    "ModelSpec",
    "LinearOperator",
    "MatrixOperator",
    "GriddingOperator",
    "ToeplitzGram",
    "dirichlet_kernel",
    "bspline",
    "psi_image",
    "build_voxel_operator",
    "build_kspace_operator",
    "build_gridding_operator",
    "build_toeplitz_gram",
    "centering_weights",
    "evaluate_kspace_voxel",
    "evaluate_image_kspace_model",
    "model_image_grid",
]


# ---------------------------------------------------------------------------
# model parameters


@dataclass(frozen=True)
class ModelSpec:
    """Parameters defining one model instance.

    Attributes
    ----------
    kind : str
        "voxel" or "kspace".
    dims : int
        1 or 2.
    N : int
        Voxel grid size per dimension (even).
    dx : float
        Voxel spacing in length-units.
    P : int
        B-spline degree (k-space model only).
    rho : float
        Oversampling factor L/N >= 1 (k-space model only). L is round(rho*N)
        incremented to the next even integer when the rounding lands odd, and
        dk = 1/(L*dx) exactly, so the image-domain spacing of the k-space
        model matches dx and the model FOV is rho times the nominal FOV.
    x0 : tuple of float
        Centering shift per dimension (default zeros).
    """

    kind: str
    dims: int
    N: int
    dx: float
    P: int = 3
    rho: float = 1.0
    x0: tuple = field(default=None)

    def __post_init__(self):
        if self.kind not in ("voxel", "kspace"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.dims not in (1, 2):
            raise ValueError(f"dims must be 1 or 2, got {self.dims}")
        if self.N <= 0 or self.N % 2 != 0:
            raise ValueError(f"N must be a positive even integer, got {self.N}")
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if self.kind == "kspace":
            if self.P < 0 or int(self.P) != self.P:
                raise ValueError(f"P must be a nonnegative integer, got {self.P}")
            if self.rho < 1:
                raise ValueError(f"rho must be >= 1, got {self.rho}")
        x0 = self.x0
        if x0 is None:
            x0 = (0.0,) * self.dims
        elif np.isscalar(x0):
            x0 = (float(x0),) * self.dims
        else:
            x0 = tuple(float(v) for v in x0)
        if len(x0) != self.dims:
            raise ValueError(f"x0 must have {self.dims} entries")
        object.__setattr__(self, "x0", x0)

    @property
    def L(self) -> int:
        """K-space model order per dimension (even)."""
        L = int(round(self.rho * self.N))
        if L % 2 != 0:
            L += 1
        return L

    @property
    def dk(self) -> float:
        """K-space basis spacing, exactly 1/(L*dx)."""
        return 1.0 / (self.L * self.dx)

    @property
    def ncols(self) -> int:
        n = self.N if self.kind == "voxel" else self.L
        return n ** self.dims

    @property
    def nominal_fov(self) -> float:
        return self.N * self.dx

    @property
    def extended_fov(self) -> float:
        """FOV spanned by the model basis (voxel: nominal; kspace: L*dx)."""
        return self.nominal_fov if self.kind == "voxel" else self.L * self.dx

    def grid(self) -> np.ndarray:
        """Centered basis-position coordinates along one axis.

        Voxel model: x_n = n*dx, n in [-N/2, N/2). K-space model: image-domain
        sample positions x_j = j*dx, j in [-L/2, L/2) (the grid of Eq-13-style
        image samples; spacing equals dx because dk*L*dx = 1).
        """
        n = self.N if self.kind == "voxel" else self.L
        return self.dx * np.arange(-n // 2, n // 2, dtype=float)


# ---------------------------------------------------------------------------
# kernel functions


def dirichlet_kernel(k, N: int, alpha: float):
    """Periodic Dirichlet kernel (1/N) sin(pi*N*a*k)/sin(pi*a*k) e^{i*pi*a*k}.

    Evaluated in the numerically stable form
    ``(-1)^j * sinc(N*w)/sinc(w) * exp(i*pi*alpha*k)`` with ``w = alpha*k - j``
    and ``j`` the nearest integer, which handles every removable singularity
    (value 1 at k=0, period 1/alpha for even N).
    """
    if N <= 0 or N % 2 != 0:
        raise ValueError(f"N must be a positive even integer, got {N}")
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    k = np.asarray(k, dtype=float)
    u = alpha * k
    j = np.rint(u)
    w = u - j
    ratio = np.sinc(N * w) / np.sinc(w)
    sign = np.where(j.astype(np.int64) % 2 == 0, 1.0, -1.0)
    return sign * ratio * np.exp(1j * np.pi * u)


def bspline(P: int, t):
    """Centered cardinal B-spline of degree P, the (P+1)-fold rect convolution.

    Support is |t| < (P+1)/2; values exactly at the support boundary are
    defined as 0. Evaluated with the explicit alternating truncated-power sum
    ``(1/P!) * sum_j (-1)^j C(P+1,j) (t + (P+1)/2 - j)_+^P``.
    """
    if P < 0 or int(P) != P:
        raise ValueError(f"P must be a nonnegative integer, got {P}")
    t = np.asarray(t, dtype=float)
    half = (P + 1) / 2.0
    if P == 0:
        return np.where(np.abs(t) < half, 1.0, 0.0)
    out = np.zeros_like(t)
    for j in range(P + 2):
        out += (-1) ** j * comb(P + 1, j) * np.maximum(t + half - j, 0.0) ** P
    out /= factorial(P)
    return np.where(np.abs(t) < half, out, 0.0)


def psi_image(x, P: int, delta_k: float):
    """Image-domain dual of the B-spline basis: dk * sinc(x*dk)^(P+1)."""
    if delta_k <= 0:
        raise ValueError("delta_k must be positive")
    if P < 0 or int(P) != P:
        raise ValueError(f"P must be a nonnegative integer, got {P}")
    x = np.asarray(x, dtype=float)
    return delta_k * np.sinc(x * delta_k) ** (P + 1)


def centering_weights(t: Trajectory, x0) -> np.ndarray:
    """Per-sample phase ramp exp(-i*2*pi*k_m.x0) (unit modulus)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.size != t.dims:
        raise ValueError(f"x0 must have {t.dims} entries")
    return np.exp(-2j * np.pi * (t.samples @ x0))


# ---------------------------------------------------------------------------
# operator realizations


class LinearOperator:
    """Forward map from coefficient vectors to k-space samples.

    Subclasses implement ``_apply`` and ``_adjoint`` on flat vectors; the
    coefficient layout is row-major over the model grid.
    """

    def __init__(self, M: int, ncols: int, coeff_shape: tuple):
        self.M = int(M)
        self.ncols = int(ncols)
        self.coeff_shape = tuple(coeff_shape)

    @property
    def shape(self) -> tuple:
        return (self.M, self.ncols)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v).ravel()
        if v.size != self.ncols:
            raise ValueError(f"expected {self.ncols} coefficients, got {v.size}")
        return self._apply(v)

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u).ravel()
        if u.size != self.M:
            raise ValueError(f"expected {self.M} samples, got {u.size}")
        return self._adjoint(u)

    def normal(self, v: np.ndarray) -> np.ndarray:
        """Gram product adjoint(apply(v)); overridden where a faster path exists."""
        return self.adjoint(self.apply(v))

    def _apply(self, v):
        raise NotImplementedError

    def _adjoint(self, u):
        raise NotImplementedError


class MatrixOperator(LinearOperator):
    """Operator backed by an explicit dense or sparse matrix."""

    def __init__(self, matrix, coeff_shape: tuple):
        super().__init__(matrix.shape[0], matrix.shape[1], coeff_shape)
        self.matrix = matrix
        self._adj = matrix.conj().T if sp.issparse(matrix) else None

    def _apply(self, v):
        return self.matrix @ v

    def _adjoint(self, u):
        if self._adj is not None:
            return self._adj @ u
        return self.matrix.conj().T @ u

    def to_dense(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return self.matrix


def _phase_matrix(k_axis: np.ndarray, positions: np.ndarray) -> np.ndarray:
    return np.exp(-2j * np.pi * np.outer(k_axis, positions))


def build_voxel_operator(t: Trajectory, spec: ModelSpec) -> MatrixOperator:
    """Dense voxel-model forward matrix A[m,n] = exp(-i*2*pi*k_m.x_n).

    Intended for desk-scale problems; refuses to allocate more than 2e8
    entries (use the gridding approximation and Toeplitz Gram beyond that).
    """
    if spec.kind != "voxel":
        raise ValueError("spec.kind must be 'voxel'")
    if t.dims != spec.dims:
        raise ValueError(f"trajectory is {t.dims}D, spec is {spec.dims}D")
    if t.M * spec.ncols > 2e8:
        raise MemoryError(
            f"dense voxel operator would hold {t.M * spec.ncols:.2e} entries; "
            "use build_gridding_operator instead")
    x = spec.grid()
    if spec.dims == 1:
        A = _phase_matrix(t.samples[:, 0], x)
        return MatrixOperator(A, (spec.N,))
    Ex = _phase_matrix(t.samples[:, 0], x)
    Ey = _phase_matrix(t.samples[:, 1], x)
    A = (Ex[:, :, None] * Ey[:, None, :]).reshape(t.M, spec.N ** 2)
    return MatrixOperator(A, (spec.N, spec.N))


def _spline_row_1d(u: float, P: int, L: int):
    """Nonzero basis indices and values for one sample coordinate u = k/dk.

    Only positions within [-L/2, L/2) are kept; boundary-of-support hits
    evaluate to zero and are dropped.
    """
    half = (P + 1) / 2.0
    lo = int(np.ceil(u - half))
    hi = int(np.floor(u + half))
    idx, vals = [], []
    for p in range(lo, hi + 1):
        if p < -L // 2 or p >= L // 2:
            continue
        v = bspline(P, u - p)
        if v != 0.0:
            idx.append(p)
            vals.append(float(v))
    return idx, vals


def build_kspace_operator(t: Trajectory, spec: ModelSpec) -> MatrixOperator:
    """Sparse k-space-model forward matrix H[m,l] = bspline(P, (k_m - l*dk)/dk).

    Basis positions run over l in [-L/2, L/2) per dimension (tensor product in
    2D); rows for samples outside the covered band keep whatever nonzeros
    remain, possibly none, and a warning reports how many rows are empty.
    """
    if spec.kind != "kspace":
        raise ValueError("spec.kind must be 'kspace'")
    if t.dims != spec.dims:
        raise ValueError(f"trajectory is {t.dims}D, spec is {spec.dims}D")
    L, P, dk = spec.L, spec.P, spec.dk
    u = t.samples / dk
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    empty = 0
    if spec.dims == 1:
        for m in range(t.M):
            idx, vals = _spline_row_1d(u[m, 0], P, L)
            indices.extend(p + L // 2 for p in idx)
            data.extend(vals)
            indptr.append(len(indices))
            empty += not idx
    else:
        for m in range(t.M):
            ix, vx = _spline_row_1d(u[m, 0], P, L)
            iy, vy = _spline_row_1d(u[m, 1], P, L)
            for px, wx in zip(ix, vx):
                base = (px + L // 2) * L
                for py, wy in zip(iy, vy):
                    indices.append(base + (py + L // 2))
                    data.append(wx * wy)
            indptr.append(len(indices))
            empty += not (ix and iy)
    if empty:
        warnings.warn(
            f"{empty} of {t.M} samples lie outside the covered k-space band "
            f"[-L*dk/2, L*dk/2) and produce empty operator rows",
            stacklevel=2)
    H = sp.csr_matrix(
        (np.asarray(data, dtype=complex), indices, indptr),
        shape=(t.M, L ** spec.dims))
    coeff_shape = (L,) if spec.dims == 1 else (L, L)
    return MatrixOperator(H, coeff_shape)


# ---------------------------------------------------------------------------
# gridding (NUFFT-style approximate voxel operator)


def _kaiser_bessel(u, width: int, beta: float):
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) <= width / 2.0
    arg = np.zeros_like(u)
    arg[inside] = beta * np.sqrt(1.0 - (2.0 * u[inside] / width) ** 2)
    out = np.zeros_like(u)
    out[inside] = bessel_i0(arg[inside]) / width
    return out


class GriddingOperator(LinearOperator):
    """Kaiser-Bessel gridding approximation of the voxel-model operator.

    Forward: deapodize, zero-pad to the oversampled grid, centered FFT, then
    sparse interpolation onto the trajectory. The interpolation wraps
    periodically on the oversampled grid, and the deapodization vector is the
    exact DFT of the kernel taps, so on-grid sampling reproduces the dense
    operator to machine precision.
    """

    def __init__(self, t: Trajectory, spec: ModelSpec, osf: int = 2,
                 kernel_width: int = 4):
        if spec.kind != "voxel":
            raise ValueError("spec.kind must be 'voxel'")
        if t.dims != spec.dims:
            raise ValueError(f"trajectory is {t.dims}D, spec is {spec.dims}D")
        if kernel_width < 2:
            raise ValueError(f"kernel_width must be >= 2, got {kernel_width}")
        if osf < 2:
            raise ValueError(f"osf must be >= 2, got {osf}")
        coeff_shape = (spec.N,) * spec.dims
        super().__init__(t.M, spec.N ** spec.dims, coeff_shape)
        self.spec = spec
        N, dims = spec.N, spec.dims
        G = osf * N
        self.G = G
        W = kernel_width
        beta = np.pi * np.sqrt((W / osf) ** 2 * (osf - 0.5) ** 2 - 0.8)
        self._interp = self._build_interp(t, G, spec.dx, W, beta, dims)
        self._interp_adj = self._interp.conj().T.tocsr()
        # Exact deapodization: the DFT of the integer kernel taps.
        j = np.arange(-(W // 2), W // 2 + 1)
        taps = _kaiser_bessel(j, W, beta)
        n = np.arange(-N // 2, N // 2)
        c = np.sum(taps[None, :] * np.cos(2 * np.pi * np.outer(n, j) / G), axis=1)
        self._deapod = c if dims == 1 else np.outer(c, c)
        self._pad = [(G - N) // 2] * dims

    @staticmethod
    def _build_interp(t, G, dx, W, beta, dims):
        u = t.samples * (G * dx)  # grid units, centered
        half = W / 2.0
        rows, cols, vals = [], [], []
        for m in range(t.M):
            per_axis = []
            for d in range(dims):
                ud = u[m, d]
                taps = np.arange(int(np.ceil(ud - half)), int(np.floor(ud + half)) + 1)
                w = _kaiser_bessel(ud - taps, W, beta)
                keep = w != 0.0
                per_axis.append(((taps[keep] + G // 2) % G, w[keep]))
            if dims == 1:
                ix, wx = per_axis[0]
                rows.extend([m] * len(ix))
                cols.extend(ix.tolist())
                vals.extend(wx.tolist())
            else:
                (ix, wx), (iy, wy) = per_axis
                for a, wa in zip(ix, wx):
                    for b, wb in zip(iy, wy):
                        rows.append(m)
                        cols.append(a * G + b)
                        vals.append(wa * wb)
        return sp.csr_matrix(
            (np.asarray(vals, dtype=complex), (rows, cols)),
            shape=(t.M, G ** dims))

    def _embed(self, img):
        G, N = self.G, self.spec.N
        pad = self._pad[0]
        if self.spec.dims == 1:
            out = np.zeros(G, dtype=complex)
            out[pad:pad + N] = img
        else:
            out = np.zeros((G, G), dtype=complex)
            out[pad:pad + N, pad:pad + N] = img
        return out

    def _crop(self, grid):
        N = self.spec.N
        pad = self._pad[0]
        if self.spec.dims == 1:
            return grid[pad:pad + N]
        return grid[pad:pad + N, pad:pad + N]

    def _apply(self, v):
        img = v.reshape(self.coeff_shape) / self._deapod
        padded = self._embed(img)
        spectrum = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(padded)))
        return self._interp @ spectrum.ravel()

    def _adjoint(self, u):
        spectrum = (self._interp_adj @ u).reshape((self.G,) * self.spec.dims)
        padded = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(spectrum)))
        padded *= self.G ** self.spec.dims
        img = self._crop(padded) / self._deapod
        return img.ravel()


def build_gridding_operator(t: Trajectory, spec: ModelSpec, osf: int = 2,
                            kernel_width: int = 4) -> GriddingOperator:
    """Approximate fast voxel-model operator (see GriddingOperator)."""
    return GriddingOperator(t, spec, osf=osf, kernel_width=kernel_width)


# ---------------------------------------------------------------------------
# Toeplitz Gram


class ToeplitzGram:
    """Exact FFT-based application of the voxel-model Gram A^H A.

    The Gram is (block) Toeplitz with kernel T(p) = sum_m exp(i*2*pi*k_m.p*dx)
    over lags p in (-N, N) per dimension; embedding the kernel in a circulant
    on the 2N grid makes each application two FFTs. The kernel itself is
    computed exactly (no gridding), so the product matches the dense Gram to
    machine precision.
    """

    def __init__(self, t: Trajectory, spec: ModelSpec):
        if spec.kind != "voxel":
            raise ValueError("spec.kind must be 'voxel'")
        if t.dims != spec.dims:
            raise ValueError(f"trajectory is {t.dims}D, spec is {spec.dims}D")
        N, dims, dx = spec.N, spec.dims, spec.dx
        self.N, self.dims = N, dims
        self.ncols = N ** dims
        self.coeff_shape = (N,) * dims
        lags = np.arange(-(N - 1), N, dtype=float)
        if dims == 1:
            kern = np.exp(2j * np.pi * dx * np.outer(t.samples[:, 0], lags)).sum(0)
            c = np.zeros(2 * N, dtype=complex)
            c[np.arange(-(N - 1), N) % (2 * N)] = kern
            self._spectrum = np.fft.fft(c)
        else:
            Ex = np.exp(2j * np.pi * dx * np.outer(t.samples[:, 0], lags))
            Ey = np.exp(2j * np.pi * dx * np.outer(t.samples[:, 1], lags))
            kern = Ex.T @ Ey  # (2N-1) x (2N-1), exact sum over samples
            c = np.zeros((2 * N, 2 * N), dtype=complex)
            wrap = np.arange(-(N - 1), N) % (2 * N)
            c[np.ix_(wrap, wrap)] = kern
            self._spectrum = np.fft.fft2(c)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v).ravel()
        if v.size != self.ncols:
            raise ValueError(f"expected {self.ncols} coefficients, got {v.size}")
        N = self.N
        if self.dims == 1:
            padded = np.zeros(2 * N, dtype=complex)
            padded[:N] = v
            out = np.fft.ifft(np.fft.fft(padded) * self._spectrum)[:N]
        else:
            padded = np.zeros((2 * N, 2 * N), dtype=complex)
            padded[:N, :N] = v.reshape(N, N)
            out = np.fft.ifft2(np.fft.fft2(padded) * self._spectrum)[:N, :N]
        return out.ravel()


def build_toeplitz_gram(t: Trajectory, spec: ModelSpec) -> ToeplitzGram:
    """Exact Gram applier for the voxel model (see ToeplitzGram)."""
    return ToeplitzGram(t, spec)


# ---------------------------------------------------------------------------
# model evaluation on grids


def evaluate_kspace_voxel(b, eval_points, spec: ModelSpec) -> np.ndarray:
    """Evaluate the voxel model's k-space F_v(k) = sum_n b_n exp(-i*2*pi*n*dx*k).

    ``eval_points`` is an (M, dims) array (or 1D array in 1D); evaluation is a
    direct summation contracted per axis, exact to rounding.
    """
    if spec.kind != "voxel":
        raise ValueError("spec.kind must be 'voxel'")
    pts = np.asarray(eval_points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] != spec.dims:
        raise ValueError(f"eval points have {pts.shape[1]} columns, "
                         f"spec is {spec.dims}D")
    x = spec.grid()
    b = np.asarray(b)
    if spec.dims == 1:
        return _phase_matrix(pts[:, 0], x) @ b.ravel()
    img = b.reshape(spec.N, spec.N)
    Ex = _phase_matrix(pts[:, 0], x)
    Ey = _phase_matrix(pts[:, 1], x)
    partial = Ey @ img.T  # (M, N) indexed by [m, nx]
    return np.sum(Ex * partial, axis=1)


def model_image_grid(spec: ModelSpec, grid_size: int) -> np.ndarray:
    """Axis coordinates for evaluate_image_kspace_model's output grid.

    The grid spans the model FOV [-1/(2*dk), 1/(2*dk)) with ``grid_size``
    points per axis: x_j = (j - grid_size/2) / (grid_size*dk).
    """
    if spec.kind != "kspace":
        raise ValueError("spec.kind must be 'kspace'")
    fov = 1.0 / spec.dk
    return (np.arange(grid_size) - grid_size // 2) * (fov / grid_size)


def evaluate_image_kspace_model(c, grid_size: int, spec: ModelSpec) -> np.ndarray:
    """Evaluate the k-space model's image dual on a uniform grid.

    Implements f(x) = psi(x + x0) * sum_l c_l exp(i*2*pi*l*dk*(x + x0)) via a
    zero-padded centered FFT: the centering phase exp(i*2*pi*l*dk*x0) folds
    into the coefficients and psi multiplies pointwise. Output shape is
    (grid_size,) in 1D, (grid_size, grid_size) in 2D, on model_image_grid.
    """
    if spec.kind != "kspace":
        raise ValueError("spec.kind must be 'kspace'")
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    L, dk, P = spec.L, spec.dk, spec.P
    if grid_size < L:
        raise ValueError(f"grid_size must be >= L = {L} to hold all coefficients")
    G = grid_size
    ell = np.arange(-L // 2, L // 2)
    x = model_image_grid(spec, G)
    c = np.asarray(c, dtype=complex)
    if spec.dims == 1:
        a = c.ravel() * np.exp(2j * np.pi * ell * dk * spec.x0[0])
        a *= (-1.0) ** ell
        A = np.zeros(G, dtype=complex)
        A[ell % G] = a
        s = G * np.fft.ifft(A)
        return psi_image(x + spec.x0[0], P, dk) * s
    img = c.reshape(L, L)
    phase_x = np.exp(2j * np.pi * ell * dk * spec.x0[0]) * (-1.0) ** ell
    phase_y = np.exp(2j * np.pi * ell * dk * spec.x0[1]) * (-1.0) ** ell
    a = img * np.outer(phase_x, phase_y)
    A = np.zeros((G, G), dtype=complex)
    A[np.ix_(ell % G, ell % G)] = a
    s = G * G * np.fft.ifft2(A)
    psi_x = psi_image(x + spec.x0[0], P, dk)
    psi_y = psi_image(x + spec.x0[1], P, dk)
    return np.outer(psi_x, psi_y) * s
