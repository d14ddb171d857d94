"""K-space sampling trajectory generators.

All generators return immutable :class:`Trajectory` objects whose sample
coordinates are expressed in cycles per length-unit. Deterministic: the same
inputs always produce bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Trajectory",
    "make_radial",
    "make_spiral",
    "make_rosette",
    "make_cartesian",
    "make_bunched_phase_encoding",
]


@dataclass(frozen=True)
class Trajectory:
    """Ordered list of k-space sampling locations.

    Attributes
    ----------
    dims : int
        Spatial dimensionality, 1 or 2.
    samples : ndarray, shape (M, dims)
        Sample coordinates in cycles per length-unit, in acquisition order.
    kmax : float
        Nominal maximum sampling radius.
    """

    dims: int
    samples: np.ndarray
    kmax: float = field(default=0.0)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[1] != self.dims:
            raise ValueError(
                f"samples must have shape (M, {self.dims}), got {samples.shape}"
            )
        if samples.shape[0] < 1:
            raise ValueError("a trajectory needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("trajectory coordinates must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "kmax", float(self.kmax))

    @property
    def M(self) -> int:
        """Number of samples."""
        return self.samples.shape[0]


def _require_positive(**kwargs):
    for name, value in kwargs.items():
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")


def make_radial(num_spokes: int, samples_per_spoke: int, kmax: float) -> Trajectory:
    """Generate a 2D radial trajectory with full-diameter spokes.

    Spoke ``j`` lies at angle ``theta_j = j*pi/num_spokes`` (half circle, so
    no spoke is duplicated by its antipode). Along each spoke the radius runs
    uniformly over ``[-kmax, kmax)``, endpoint-exclusive at ``+kmax``, which
    places the k-space center on every spoke once.

    Parameters
    ----------
    num_spokes : int
        Number of radial lines.
    samples_per_spoke : int
        Samples per line (diameter sampling).
    kmax : float
        Maximum sampling radius in cycles per length-unit.

    Returns
    -------
    Trajectory
        2D trajectory with ``M = num_spokes * samples_per_spoke`` samples,
        ordered spoke by spoke.
    """
    _require_positive(num_spokes=num_spokes, samples_per_spoke=samples_per_spoke,
                      kmax=kmax)
    radii = -kmax + 2.0 * kmax * np.arange(samples_per_spoke) / samples_per_spoke
    angles = np.pi * np.arange(num_spokes) / num_spokes
    kx = np.outer(np.cos(angles), radii).ravel()
    ky = np.outer(np.sin(angles), radii).ravel()
    return Trajectory(dims=2, samples=np.column_stack([kx, ky]), kmax=kmax)


def make_spiral(num_interleaves: int, samples_per_readout: int,
                num_turns: float, kmax: float) -> Trajectory:
    """Generate an Archimedean spiral trajectory.

    Interleave ``j`` follows ``k(t) = kmax * t * exp(i*2*pi*(num_turns*t + j/J))``
    with ``t`` sampled uniformly on [0, 1] inclusive, ``samples_per_readout``
    points per interleave.
    """
    _require_positive(num_interleaves=num_interleaves,
                      samples_per_readout=samples_per_readout,
                      num_turns=num_turns, kmax=kmax)
    if samples_per_readout == 1:
        t = np.zeros(1)
    else:
        t = np.linspace(0.0, 1.0, samples_per_readout)
    parts = []
    for j in range(num_interleaves):
        z = kmax * t * np.exp(2j * np.pi * (num_turns * t + j / num_interleaves))
        parts.append(np.column_stack([z.real, z.imag]))
    return Trajectory(dims=2, samples=np.vstack(parts), kmax=kmax)


def make_rosette(omega1: float, omega2: float, samples: int, kmax: float) -> Trajectory:
    """Generate a rosette trajectory ``k(t) = kmax*sin(2*pi*w1*t)*exp(i*2*pi*w2*t)``.

    ``omega1`` controls the petal (radial oscillation) rate and ``omega2`` the
    rotation rate; ``t`` is sampled uniformly on [0, 1] inclusive.
    """
    _require_positive(omega1=omega1, omega2=omega2, samples=samples, kmax=kmax)
    if samples == 1:
        t = np.zeros(1)
    else:
        t = np.linspace(0.0, 1.0, samples)
    z = kmax * np.sin(2 * np.pi * omega1 * t) * np.exp(2j * np.pi * omega2 * t)
    return Trajectory(dims=2, samples=np.column_stack([z.real, z.imag]), kmax=kmax)


def make_cartesian(N: int, delta_k: float, dims: int = 1) -> Trajectory:
    """Generate a centered uniform Cartesian grid ``k_m = m*delta_k``.

    ``m`` runs over ``-N/2 .. N/2-1`` per dimension (N must be even); in 2D
    the grid is the tensor product with the first axis varying slowest.
    """
    _require_positive(N=N, delta_k=delta_k)
    if N % 2 != 0:
        raise ValueError(f"N must be even, got {N}")
    if dims not in (1, 2):
        raise ValueError(f"dims must be 1 or 2, got {dims}")
    line = delta_k * np.arange(-N // 2, N // 2, dtype=float)
    if dims == 1:
        samples = line[:, None]
    else:
        kx, ky = np.meshgrid(line, line, indexing="ij")
        samples = np.column_stack([kx.ravel(), ky.ravel()])
    return Trajectory(dims=dims, samples=samples, kmax=abs(line).max())


def make_bunched_phase_encoding(base: Trajectory, bunch_offsets) -> Trajectory:
    """Replicate a base trajectory at a small set of offsets (BPE-style).

    Each base sample appears once per offset; output ordering is
    offset-major (all base samples at offset 0, then offset 1, ...).
    """
    offsets = np.atleast_2d(np.asarray(bunch_offsets, dtype=float))
    if offsets.shape[1] != base.dims:
        raise ValueError(
            f"offsets must be {base.dims}-dimensional, got shape {offsets.shape}"
        )
    parts = [base.samples + off[None, :] for off in offsets]
    kmax = max(base.kmax, float(np.abs(np.vstack(parts)).max()))
    return Trajectory(dims=base.dims, samples=np.vstack(parts), kmax=kmax)
