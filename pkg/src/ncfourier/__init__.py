"""Non-Cartesian Fourier imaging toolkit.

Implements two linear models for non-Cartesian Fourier data: the classical
image-domain voxel model (shifted voxel functions, dense/NUFFT/Toeplitz
operators) and a compact-support k-space model built from uniformly shifted
B-splines (sparse operators, extended field of view). Shared iterative
solvers, analytic ellipse phantoms, diagnostic analyses, and a SENSE+TV
multichannel path allow the two models to be compared end to end.
"""

from .trajectory import (
    Trajectory,
    make_radial,
    make_spiral,
    make_rosette,
    make_cartesian,
    make_bunched_phase_encoding,
)
from .phantom import (
    Ellipse,
    EllipsePhantom,
    ellipse_kspace,
    point_source_kspace,
    sample_phantom,
    add_noise,
    rasterize_phantom,
    default_head_phantom,
    out_of_fov_phantom,
)
from .operators import (
    ModelSpec,
    LinearOperator,
    MatrixOperator,
    GriddingOperator,
    ToeplitzGram,
    dirichlet_kernel,
    bspline,
    psi_image,
    build_voxel_operator,
    build_kspace_operator,
    build_gridding_operator,
    build_toeplitz_gram,
    centering_weights,
    evaluate_kspace_voxel,
    model_image_grid,
    evaluate_image_kspace_model,
)
from .solvers import (
    SolveConfig,
    ReconResult,
    FiniteDifference,
    cg_tikhonov,
    lsqr_tikhonov,
    fista_tv,
    power_iteration_norm,
    stacked_operator_norm,
)
from .analysis import (
    ApproxErrorSpec,
    SubspaceMap,
    approx_error,
    rms_approx_error,
    error_sweep,
    rms_error_contour,
    mean_singular_value_index,
    near_nullspace_projection,
    ssim,
    ssim_map,
    convergence_maps,
    axis_artifact_energy,
)
from .multichannel import (
    SensitivityMaps,
    ChannelData,
    make_sensitivities,
    simulate_multichannel,
    build_sense_voxel_ops,
    build_sense_kspace_ops,
    sense_tv_voxel,
    sense_tv_kspace,
    channel_centroid,
)

__version__ = "0.1.0"

__all__ = [
    "Trajectory",
    "make_radial",
    "make_spiral",
    "make_rosette",
    "make_cartesian",
    "make_bunched_phase_encoding",
    "Ellipse",
    "EllipsePhantom",
    "ellipse_kspace",
    "point_source_kspace",
    "sample_phantom",
    "add_noise",
    "rasterize_phantom",
    "default_head_phantom",
    "out_of_fov_phantom",
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
    "model_image_grid",
    "evaluate_image_kspace_model",
    "SolveConfig",
    "ReconResult",
    "FiniteDifference",
    "cg_tikhonov",
    "lsqr_tikhonov",
    "fista_tv",
    "power_iteration_norm",
    "stacked_operator_norm",
    "ApproxErrorSpec",
    "SubspaceMap",
    "approx_error",
    "rms_approx_error",
    "error_sweep",
    "rms_error_contour",
    "mean_singular_value_index",
    "near_nullspace_projection",
    "ssim",
    "ssim_map",
    "convergence_maps",
    "axis_artifact_energy",
    "SensitivityMaps",
    "ChannelData",
    "make_sensitivities",
    "simulate_multichannel",
    "build_sense_voxel_ops",
    "build_sense_kspace_ops",
    "sense_tv_voxel",
    "sense_tv_kspace",
    "channel_centroid",
]
