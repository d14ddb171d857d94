import numpy as np
import numpy.testing as npt
import pytest

from ncfourier.analysis import (
    ApproxErrorSpec,
    approx_error,
    axis_artifact_energy,
    convergence_maps,
    error_sweep,
    mean_singular_value_index,
    near_nullspace_projection,
    rms_approx_error,
    rms_error_contour,
    ssim,
    ssim_map,
)
from ncfourier.operators import MatrixOperator, ModelSpec, build_kspace_operator
from ncfourier.trajectory import Trajectory

from conftest import random_trajectory


def voxel_espec(N=64, **kw):
    model = ModelSpec(kind="voxel", dims=1, N=N, dx=1.0)
    return ApproxErrorSpec(model=model, **kw)


def kspace_espec(N=64, P=3, rho=1.3, **kw):
    model = ModelSpec(kind="kspace", dims=1, N=N, dx=1.0, P=P, rho=rho)
    return ApproxErrorSpec(model=model, **kw)


class TestApproxErrorSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ApproxErrorSpec(model=ModelSpec(kind="voxel", dims=2, N=8, dx=1.0))
        with pytest.raises(ValueError):
            ApproxErrorSpec(model=ModelSpec(kind="voxel", dims=1, N=8, dx=1.0),
                            quadrature_nodes=32)
        with pytest.raises(ValueError):
            ApproxErrorSpec(model=ModelSpec(kind="voxel", dims=1, N=8, dx=1.0),
                            quadrature_nodes=1024, refine_cap=512)


class TestApproxError:
    def test_on_grid_source_is_exact_for_voxel(self):
        spec = voxel_espec(N=16)
        assert approx_error(3.0, spec) < 0.01
        assert approx_error(-7.0, spec) < 0.01

    def test_off_grid_source_errs_for_voxel(self):
        spec = voxel_espec(N=16)
        assert approx_error(0.5, spec) > 1.0

    def test_voxel_reflection_symmetry(self):
        """The voxel grid n in [-N/2, N/2) mirrors about -dx/2."""
        spec = voxel_espec(N=16)
        for x0 in (2.3, 0.7, 5.1):
            npt.assert_allclose(approx_error(x0, spec),
                                approx_error(-1.0 - x0, spec), atol=1e-9)

    def test_error_bounded_0_100(self):
        spec = kspace_espec(N=16)
        for x0 in (0.0, 1.7, 12.0, 40.0):
            e = approx_error(x0, spec)
            assert 0.0 <= e <= 100.0

    def test_sweep_matches_pointwise(self):
        spec = kspace_espec(N=16)
        x0s = np.array([-5.0, -1.3, 0.4, 2.0, 6.5])
        swept = error_sweep(spec, x0s)
        single = np.array([approx_error(x, spec) for x in x0s])
        npt.assert_allclose(swept, single, atol=0.1)

    def test_oversampling_reduces_kspace_error(self):
        tight = rms_approx_error(kspace_espec(N=16, rho=1.0), num_x0=65)
        wide = rms_approx_error(kspace_espec(N=16, rho=1.3), num_x0=65)
        assert wide < tight

    def test_degree_reduces_kspace_error_when_oversampled(self):
        low = rms_approx_error(kspace_espec(N=16, P=1, rho=1.3), num_x0=65)
        high = rms_approx_error(kspace_espec(N=16, P=3, rho=1.3), num_x0=65)
        assert high < low

    def test_num_x0_validation(self):
        with pytest.raises(ValueError):
            rms_approx_error(voxel_espec(N=16), num_x0=1)


class TestFrozenReferenceValues:
    """Values pinned from an independent dense least-squares evaluation."""

    def test_voxel_rms_64(self):
        got = rms_approx_error(voxel_espec(N=64), num_x0=513)
        npt.assert_allclose(got, 12.341, atol=0.005)

    def test_kspace_rms_64(self):
        got = rms_approx_error(kspace_espec(N=64, P=3, rho=1.3), num_x0=513)
        npt.assert_allclose(got, 3.852, atol=0.005)

    def test_contour_cells(self):
        base = ModelSpec(kind="kspace", dims=1, N=64, dx=1.0)
        got = rms_error_contour([1, 3], [1.0, 1.1, 1.3], base, num_x0=129)
        want = np.array([[29.252, 23.395, 14.466],
                         [20.055, 11.969, 3.858]])
        npt.assert_allclose(got, want, atol=0.005)


class TestMeanSingularValueIndex:
    def test_voxel_shape_range_and_spectrum(self, rng):
        spec = ModelSpec(kind="voxel", dims=1, N=16, dx=1.0)
        t = random_trajectory(rng, 24, dims=1)
        from ncfourier.operators import build_voxel_operator
        res = mean_singular_value_index(build_voxel_operator(t, spec), spec)
        K = 16
        assert res.mu.shape == (16,)
        assert np.all(res.mu >= 1.0) and np.all(res.mu <= K)
        assert np.all(np.diff(res.singular_values) <= 1e-12)

    def test_voxel_matches_direct_svd(self, rng):
        spec = ModelSpec(kind="voxel", dims=1, N=8, dx=1.0)
        t = random_trajectory(rng, 20, dims=1)
        from ncfourier.operators import build_voxel_operator
        op = build_voxel_operator(t, spec)
        res = mean_singular_value_index(op, spec)
        _, s, Vh = np.linalg.svd(op.to_dense())
        V = Vh.conj().T[:, :8]
        w = np.abs(V)
        want = (w @ np.arange(1, 9)) / w.sum(axis=1)
        npt.assert_allclose(res.mu, want, atol=1e-8)
        npt.assert_allclose(res.singular_values, s[:8], atol=1e-10)

    def test_kspace_vectors_transformed_to_image_grid(self, rng):
        spec = ModelSpec(kind="kspace", dims=1, N=8, dx=1.0, P=3, rho=1.0)
        t = random_trajectory(rng, 30, dims=1, kmax=0.4)
        op = build_kspace_operator(t, spec)
        res = mean_singular_value_index(op, spec)
        assert res.mu.shape == (spec.L,)
        H = op.to_dense()
        _, s, Vh = np.linalg.svd(H)
        K = min(30, spec.L)
        V = Vh.conj().T[:, :K]
        cube = np.fft.fftshift(
            np.fft.ifft(np.fft.ifftshift(V, axes=0), axis=0, norm="ortho"),
            axes=0)
        w = np.abs(cube)
        want = (w @ np.arange(1.0, K + 1)) / w.sum(axis=1)
        npt.assert_allclose(res.mu, want, atol=1e-8)

    def test_2d_grid_shape(self, rng):
        spec = ModelSpec(kind="voxel", dims=2, N=6, dx=1.0)
        t = random_trajectory(rng, 30, dims=2)
        from ncfourier.operators import build_voxel_operator
        res = mean_singular_value_index(build_voxel_operator(t, spec), spec)
        assert res.mu.shape == (6, 6)

    def test_memory_guard(self):
        class Huge:
            M = 20000
            ncols = 1000
        with pytest.raises(MemoryError):
            mean_singular_value_index(Huge(),
                                      ModelSpec(kind="voxel", dims=2, N=32,
                                                dx=1.0))


class TestNearNullspaceProjection:
    def test_fraction_zero_gives_zero(self, rng):
        op = MatrixOperator(rng.standard_normal((12, 8))
                            + 1j * rng.standard_normal((12, 8)), (8,))
        c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        npt.assert_array_equal(near_nullspace_projection(op, c, 0.0), 0)

    def test_fraction_above_one_gives_identity(self, rng):
        op = MatrixOperator(rng.standard_normal((12, 8))
                            + 1j * rng.standard_normal((12, 8)), (8,))
        c = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        npt.assert_allclose(near_nullspace_projection(op, c, 1.1), c,
                            atol=1e-10)

    def test_idempotent(self, rng):
        op = MatrixOperator(rng.standard_normal((20, 15))
                            + 1j * rng.standard_normal((20, 15)), (15,))
        c = rng.standard_normal(15) + 1j * rng.standard_normal(15)
        p1 = near_nullspace_projection(op, c, 0.5)
        p2 = near_nullspace_projection(op, p1, 0.5)
        npt.assert_allclose(p2, p1, atol=1e-10)

    @pytest.mark.parametrize("shape", [(25, 10), (10, 25)])
    def test_matches_full_svd_projection(self, shape, rng):
        """Tall and wide paths agree with an explicit SVD-based projector."""
        M, n = shape
        A = rng.standard_normal((M, n)) + 1j * rng.standard_normal((M, n))
        op = MatrixOperator(A, (n,))
        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        frac = 0.4
        _, s, Vh = np.linalg.svd(A, full_matrices=True)
        sigma = np.zeros(n)
        sigma[:len(s)] = s
        Vs = Vh.conj().T[:, sigma < frac * sigma.max()]
        want = Vs @ (Vs.conj().T @ c)
        got = near_nullspace_projection(op, c, frac)
        npt.assert_allclose(got, want, atol=1e-10)

    def test_preserves_shape_2d(self, rng):
        A = rng.standard_normal((30, 16)) + 1j * rng.standard_normal((30, 16))
        op = MatrixOperator(A, (4, 4))
        c = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        assert near_nullspace_projection(op, c, 0.3).shape == (4, 4)

    def test_bad_inputs(self, rng):
        op = MatrixOperator(np.eye(4, dtype=complex), (4,))
        with pytest.raises(ValueError):
            near_nullspace_projection(op, np.zeros(5), 0.5)
        with pytest.raises(ValueError):
            near_nullspace_projection(op, np.zeros(4), -0.1)

    def test_memory_guard(self):
        class Huge:
            M = 6000
            ncols = 6000
        with pytest.raises(MemoryError):
            near_nullspace_projection(Huge(), np.zeros(6000), 0.5)


class TestSsim:
    def test_identical_images_score_one(self, rng):
        img = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_bounded_over_random_pairs(self, rng):
        for _ in range(100):
            a = rng.standard_normal((16, 16))
            b = rng.standard_normal((16, 16))
            v = ssim(a, b)
            assert -1.0 <= v <= 1.0

    def test_noise_degrades_monotonically(self, rng):
        ref = np.zeros((48, 48))
        ref[12:36, 12:36] = 1.0
        small = ssim(ref, ref + 0.05 * rng.standard_normal(ref.shape))
        large = ssim(ref, ref + 0.50 * rng.standard_normal(ref.shape))
        assert large < small < 1.0

    def test_joint_scaling_invariance(self, rng):
        a = np.abs(rng.standard_normal((20, 20))) + 0.5
        b = a + 0.1 * rng.standard_normal((20, 20))
        npt.assert_allclose(ssim(3.0 * a, 3.0 * b), ssim(a, b), atol=1e-10)

    def test_fixed_dynamic_range(self, rng):
        a = np.abs(rng.standard_normal((20, 20)))
        b = np.abs(rng.standard_normal((20, 20)))
        v1 = ssim(a, b, dynamic_range=2.0)
        v2 = ssim(a, b, dynamic_range=2.0)
        assert v1 == v2
        assert ssim(a, b, dynamic_range=100.0) != v1

    def test_zero_images(self):
        z = np.zeros((8, 8))
        assert ssim(z, z) == pytest.approx(1.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_map_shape(self, rng):
        a = rng.standard_normal((10, 12))
        assert ssim_map(a, a).shape == (10, 12)


class TestConvergenceMaps:
    def _ref(self, rng):
        return rng.uniform(1.0, 2.0, size=(32, 32))

    def test_instant_convergence(self, rng):
        ref = self._ref(rng)
        iters, times = convergence_maps([ref, ref, ref], ref)
        npt.assert_array_equal(iters, 1.0)
        npt.assert_array_equal(times, 1.0)

    def test_requires_staying_converged(self, rng):
        """A relapse resets the count: good, bad, good, good -> index 3."""
        ref = self._ref(rng)
        bad = np.zeros_like(ref)
        iters, _ = convergence_maps([ref, bad, ref, ref], ref)
        npt.assert_array_equal(iters, 3.0)

    def test_never_converged_is_inf(self, rng):
        ref = self._ref(rng)
        bad = np.zeros_like(ref)
        iters, times = convergence_maps([bad, bad], ref,
                                        times=[0.5, 1.0])
        assert np.all(np.isinf(iters))
        assert np.all(np.isinf(times))

    def test_time_map_reads_cumulative_seconds(self, rng):
        ref = self._ref(rng)
        bad = np.zeros_like(ref)
        iters, times = convergence_maps([bad, ref, ref], ref,
                                        times=[0.1, 0.25, 0.4])
        npt.assert_array_equal(iters, 2.0)
        npt.assert_array_equal(times, 0.25)

    def test_validation(self, rng):
        ref = self._ref(rng)
        with pytest.raises(ValueError):
            convergence_maps([], ref)
        with pytest.raises(ValueError):
            convergence_maps([ref], ref, times=[0.1, 0.2])


class TestAxisArtifactEnergy:
    def test_axis_only_energy_is_one(self):
        img = np.zeros((32, 32))
        img[16, :] = 1.0
        img[:, 16] = 2.0
        assert axis_artifact_energy(img) == pytest.approx(1.0)

    def test_off_axis_energy_is_zero(self):
        img = np.zeros((32, 32))
        img[3, 25] = 7.0
        assert axis_artifact_energy(img) == 0.0

    def test_uniform_image_fraction(self):
        R = C = 40
        img = np.ones((R, C))
        got = axis_artifact_energy(img, band_width=3)
        want = (3 * C + 3 * R - 9) / (R * C)
        assert got == pytest.approx(want, abs=1e-12)

    def test_zero_image(self):
        assert axis_artifact_energy(np.zeros((8, 8))) == 0.0

    def test_wider_band_captures_more(self, rng):
        img = np.abs(rng.standard_normal((64, 64)))
        narrow = axis_artifact_energy(img, band_width=3)
        wide = axis_artifact_energy(img, band_width=9)
        assert wide > narrow

    def test_requires_2d(self):
        with pytest.raises(ValueError):
            axis_artifact_energy(np.zeros(16))
