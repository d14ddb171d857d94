"""Serialization for trajectories, phantoms, data, and result files.

Formats:

* ``.f32`` raw-float images: 16-byte header (magic ``KSRF``, uint32-LE width,
  height, components with 1=real and 2=complex interleaved) followed by
  little-endian float32 values in row-major order. The quantitative record.
* ``.pgm`` binary P5, 16 bit, magnitude min-max normalized per image; for
  human inspection only.
* ``.csv`` RFC-4180 with a header row and ``.`` decimal separator.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .phantom import Ellipse, EllipsePhantom
from .trajectory import Trajectory

__all__ = [
    "write_f32",
    "read_f32",
    "write_pgm",
    "save_trajectory",
    "load_trajectory",
    "save_phantom",
    "load_phantom",
    "save_data",
    "load_data",
    "save_channel_data",
    "save_sparse",
    "save_history",
    "save_sweep",
    "save_contour",
    "write_params",
]

_MAGIC = b"KSRF"


def write_f32(path, arr) -> None:
    """Write a real or complex 1D/2D array in the raw-float format."""
    arr = np.asarray(arr)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"only 1D/2D arrays supported, got ndim={arr.ndim}")
    height, width = arr.shape
    if np.iscomplexobj(arr):
        components = 2
        flat = np.empty((height, width * 2), dtype="<f4")
        flat[:, 0::2] = arr.real
        flat[:, 1::2] = arr.imag
    else:
        components = 1
        flat = arr.astype("<f4")
    header = _MAGIC + struct.pack("<III", width, height, components)
    with open(path, "wb") as f:
        f.write(header)
        f.write(flat.tobytes())


def read_f32(path) -> np.ndarray:
    """Read a raw-float file; returns shape (width,) when height is 1."""
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}")
    width, height, components = struct.unpack("<III", raw[4:16])
    if components not in (1, 2):
        raise ValueError(f"{path}: bad component count {components}")
    data = np.frombuffer(raw[16:], dtype="<f4")
    expected = width * height * components
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} floats, found {data.size}")
    data = data.reshape(height, width * components)
    if components == 2:
        out = data[:, 0::2] + 1j * data[:, 1::2]
    else:
        out = data.astype(np.float64)
    return out[0] if height == 1 else out


def write_pgm(path, img) -> None:
    """Write image magnitude as 16-bit binary PGM, min-max normalized."""
    mag = np.abs(np.asarray(img))
    if mag.ndim == 1:
        mag = mag[None, :]
    lo, hi = float(mag.min()), float(mag.max())
    if hi > lo:
        scaled = (mag - lo) / (hi - lo) * 65535.0
    else:
        scaled = np.zeros_like(mag)
    pixels = np.round(scaled).astype(">u2")
    height, width = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        f.write(pixels.tobytes())


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def save_trajectory(path, t: Trajectory) -> None:
    header = ["kx"] if t.dims == 1 else ["kx", "ky"]
    rows = [[_fmt(v) for v in row] for row in t.samples]
    _write_csv(path, header, rows)


def load_trajectory(path) -> Trajectory:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    samples = np.asarray(rows)
    kmax = float(np.max(np.hypot(*samples.T))) if len(header) == 2 else float(
        np.max(np.abs(samples)))
    return Trajectory(dims=len(header), samples=samples, kmax=kmax)


def save_phantom(path, p: EllipsePhantom) -> None:
    """Phantom CSV: ``cx,cy,a,b,phi,amp_re,amp_im`` (1D: ``cx,a,amp_re,amp_im``)."""
    if p.dims == 1:
        header = ["cx", "a", "amp_re", "amp_im"]
        rows = [[_fmt(e.center[0]), _fmt(e.a),
                 _fmt(np.real(e.amplitude)), _fmt(np.imag(e.amplitude))]
                for e in p.ellipses]
    else:
        header = ["cx", "cy", "a", "b", "phi", "amp_re", "amp_im"]
        rows = [[_fmt(e.center[0]), _fmt(e.center[1]), _fmt(e.a), _fmt(e.b),
                 _fmt(e.phi), _fmt(np.real(e.amplitude)), _fmt(np.imag(e.amplitude))]
                for e in p.ellipses]
    _write_csv(path, header, rows)


def load_phantom(path) -> EllipsePhantom:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    ellipses = []
    for row in rows:
        if len(header) == 4:
            cx, a, re, im = row
            ellipses.append(Ellipse(center=(cx,), a=a, amplitude=re + 1j * im))
        else:
            cx, cy, a, b, phi, re, im = row
            ellipses.append(Ellipse(center=(cx, cy), a=a, b=b, phi=phi,
                                    amplitude=re + 1j * im))
    return EllipsePhantom(ellipses)


def save_data(path, t: Trajectory, d) -> None:
    """Data CSV: ``kx[,ky],re,im`` in sample order."""
    d = np.asarray(d)
    header = (["kx"] if t.dims == 1 else ["kx", "ky"]) + ["re", "im"]
    rows = []
    for k_row, value in zip(t.samples, d):
        rows.append([_fmt(v) for v in k_row] + [_fmt(value.real), _fmt(value.imag)])
    _write_csv(path, header, rows)


def load_data(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    arr = np.asarray(rows)
    dims = len(header) - 2
    samples = arr[:, :dims]
    d = arr[:, dims] + 1j * arr[:, dims + 1]
    kmax = float(np.max(np.linalg.norm(samples, axis=1)))
    return Trajectory(dims=dims, samples=samples, kmax=kmax), d


def save_channel_data(path, t: Trajectory, data_per_channel) -> None:
    """Data CSV with an extra trailing ``channel`` column."""
    header = (["kx"] if t.dims == 1 else ["kx", "ky"]) + ["re", "im", "channel"]
    rows = []
    for q, d in enumerate(data_per_channel):
        for k_row, value in zip(t.samples, np.asarray(d)):
            rows.append([_fmt(v) for v in k_row]
                        + [_fmt(value.real), _fmt(value.imag), str(q)])
    _write_csv(path, header, rows)


def save_sparse(path, matrix) -> None:
    """Sparse matrix dump: ``row,col,re,im``, row-major order."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    rows = [[str(coo.row[i]), str(coo.col[i]),
             _fmt(coo.data[i].real), _fmt(np.imag(coo.data[i]))]
            for i in order]
    _write_csv(path, ["row", "col", "re", "im"], rows)


def save_history(path, cost_history, time_history) -> None:
    """Solver history CSV: ``iter,cost,cum_seconds`` with 1-based iterations."""
    rows = [[str(i), _fmt(c), _fmt(s)]
            for i, (c, s) in enumerate(zip(cost_history, time_history), start=1)]
    _write_csv(path, ["iter", "cost", "cum_seconds"], rows)


def save_sweep(path, x0_values, errors) -> None:
    rows = [[_fmt(x), _fmt(e)] for x, e in zip(x0_values, errors)]
    _write_csv(path, ["x0", "error_pct"], rows)


def save_contour(path, rho_values, p_values, rms_matrix) -> None:
    """Contour CSV: one ``rho,P,rms_pct`` row per (rho, P) cell."""
    rows = []
    for i, rho in enumerate(rho_values):
        for j, p in enumerate(p_values):
            rows.append([_fmt(rho), str(int(p)), _fmt(rms_matrix[i][j])])
    _write_csv(path, ["rho", "P", "rms_pct"], rows)


def write_params(path, params: dict) -> None:
    """Write the fully resolved configuration, one ``key = value`` per line."""
    lines = [f"{key} = {params[key]}" for key in sorted(params)]
    Path(path).write_text("\n".join(lines) + "\n")
