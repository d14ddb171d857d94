"""End-to-end acceptance checks, one test per criterion.

Each criterion shows up as a single pass or fail line under ``pytest -v``.
The heavyweight batch experiments run once per session through the same
entry points the command-line driver uses, at their default problem sizes;
the lighter criteria compute directly against the library. Every test also
enforces its own runtime budget, and a final test checks the combined
budget of the recorded runs.
"""

import csv
import time

import numpy as np
import pytest

from ncfourier.analysis import (
    ApproxErrorSpec,
    rms_approx_error,
    rms_error_contour,
)
from ncfourier.cli import (
    ARTIFACT_DEFAULTS,
    RECONSTRUCT_DEFAULTS,
    SENSE_DEFAULTS,
    SUBSPACE_DEFAULTS,
    cmd_artifact_demo,
    cmd_reconstruct,
    cmd_sense_tv,
    cmd_subspace,
)
from ncfourier.multichannel import (
    ChannelData,
    make_sensitivities,
    sense_tv_voxel,
)
from ncfourier.operators import (
    ModelSpec,
    bspline,
    build_gridding_operator,
    build_kspace_operator,
    build_toeplitz_gram,
    build_voxel_operator,
    evaluate_kspace_voxel,
)
from ncfourier.solvers import SolveConfig, cg_tikhonov, lsqr_tikhonov
from ncfourier.trajectory import Trajectory

RECORDED = {}


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def random_trajectory(rng, M, dims, kmax=0.49):
    ks = rng.uniform(-kmax, kmax, size=(M, dims))
    return Trajectory(dims=dims, samples=ks, kmax=kmax)


def complex_normal(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture(scope="module")
def artifact_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_artifact")
    start = time.perf_counter()
    cmd_artifact_demo(dict(ARTIFACT_DEFAULTS), str(out))
    RECORDED["artifact-demo"] = time.perf_counter() - start
    return out, RECORDED["artifact-demo"]


@pytest.fixture(scope="module")
def subspace_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_subspace")
    start = time.perf_counter()
    cmd_subspace(dict(SUBSPACE_DEFAULTS), str(out))
    RECORDED["subspace"] = time.perf_counter() - start
    return out, RECORDED["subspace"]


@pytest.fixture(scope="module")
def recon_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_recon")
    start = time.perf_counter()
    cmd_reconstruct(dict(RECONSTRUCT_DEFAULTS), str(out))
    RECORDED["reconstruct"] = time.perf_counter() - start
    return out, RECORDED["reconstruct"]


@pytest.fixture(scope="module")
def sense_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_sense")
    start = time.perf_counter()
    cmd_sense_tv(dict(SENSE_DEFAULTS), str(out))
    RECORDED["sense-tv"] = time.perf_counter() - start
    return out, RECORDED["sense-tv"]


def test_criterion_1_rms_approximation_error():
    """1D default sweep hits the reference 11.2% / 4.1% within 1.5 pp and
    the spline model stays below 0.6x the voxel model."""
    start = time.perf_counter()
    spec_v = ModelSpec(kind="voxel", dims=1, N=64, dx=1.0)
    spec_k = ModelSpec(kind="kspace", dims=1, N=64, dx=1.0, P=3, rho=1.3)
    rms_v = rms_approx_error(ApproxErrorSpec(model=spec_v))
    rms_k = rms_approx_error(ApproxErrorSpec(model=spec_k))
    elapsed = time.perf_counter() - start
    RECORDED["criterion 1"] = elapsed
    print(f"criterion 1: voxel {rms_v:.3f}%, kspace {rms_k:.3f}%, "
          f"ratio {rms_k / rms_v:.3f}, {elapsed:.1f}s")
    assert abs(rms_v - 11.2) <= 1.5, f"voxel RMS {rms_v:.3f}%, want 11.2 +/- 1.5"
    assert abs(rms_k - 4.1) <= 1.5, f"kspace RMS {rms_k:.3f}%, want 4.1 +/- 1.5"
    assert rms_k < 0.6 * rms_v, f"ratio {rms_k / rms_v:.3f} not below 0.6"
    assert elapsed < 60.0


def test_criterion_2_periodicity_and_leakage():
    """Voxel-model k-space is 1/dx-periodic to 1e-10; a least-norm fit of a
    single off-grid sample leaks >= 1% of its energy into the opposite
    k-space half under the voxel model but stays exactly inside the local
    spline support under the k-space model."""
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    N = 64
    spec_v = ModelSpec(kind="voxel", dims=1, N=N, dx=1.0)
    b = complex_normal(rng, N)
    ks = rng.uniform(-0.5, 0.5, size=200)
    f0 = evaluate_kspace_voxel(b, ks, spec_v)
    f1 = evaluate_kspace_voxel(b, ks + 1.0, spec_v)
    per = np.max(np.abs(f1 - f0)) / np.max(np.abs(f0))
    assert per <= 1e-10, f"periodicity defect {per:.2e}"

    k0 = 0.05
    d0 = 1.0 + 0.5j
    fine = np.linspace(-0.5, 0.5, 4096, endpoint=False)

    row = np.exp(-2j * np.pi * k0 * np.arange(-N // 2, N // 2))
    b_mn = row.conj() * (d0 / np.vdot(row, row).real)
    ev = np.abs(evaluate_kspace_voxel(b_mn, fine, spec_v)) ** 2
    leak = ev[fine < 0].sum() / ev.sum()

    spec_k = ModelSpec(kind="kspace", dims=1, N=N, dx=1.0, P=3, rho=1.3)
    t1 = Trajectory(dims=1, samples=np.array([[k0]]), kmax=0.5)
    h = build_kspace_operator(t1, spec_k).to_dense()[0]
    c_mn = h.conj() * (d0 / np.vdot(h, h).real)
    t_fine = Trajectory(dims=1, samples=fine[:, None], kmax=0.5)
    ek = np.abs(build_kspace_operator(t_fine, spec_k).matrix @ c_mn) ** 2
    outside = np.abs(fine - k0) > (spec_k.P + 1) * spec_k.dk
    out_frac = ek[outside].sum() / ek.sum()

    elapsed = time.perf_counter() - start
    RECORDED["criterion 2"] = elapsed
    print(f"criterion 2: periodicity {per:.2e}, voxel leak {100 * leak:.2f}%, "
          f"kspace outside-support {out_frac:.2e}, {elapsed:.1f}s")
    assert leak >= 0.01, f"voxel opposite-half leak {100 * leak:.3f}% < 1%"
    assert out_frac <= 1e-10, f"kspace energy outside support {out_frac:.2e}"
    assert elapsed < 5.0


def test_criterion_3_operator_exactness():
    """Sparse kernel matrix matches direct evaluation to 1e-12, the Toeplitz
    Gram matches the dense normal matrix to 1e-10, gridding tracks the dense
    operator to 1e-3, and every operator passes adjoint identities."""
    start = time.perf_counter()
    rng = np.random.default_rng(11)

    spec_k = ModelSpec(kind="kspace", dims=2, N=16, dx=1.0, P=3, rho=1.3)
    t = random_trajectory(rng, 200, 2, kmax=0.45)
    Hop = build_kspace_operator(t, spec_k)
    H = Hop.to_dense()
    L, dk, P = spec_k.L, spec_k.dk, spec_k.P
    ls = np.arange(-L // 2, L // 2)
    zx = bspline(P, (t.samples[:, :1] - ls * dk) / dk)
    zy = bspline(P, (t.samples[:, 1:] - ls * dk) / dk)
    direct = (zx[:, :, None] * zy[:, None, :]).reshape(t.M, L * L)
    h_err = np.max(np.abs(H - direct))
    assert h_err <= 1e-12, f"kernel matrix max error {h_err:.2e}"

    spec_v = ModelSpec(kind="voxel", dims=2, N=16, dx=1.0)
    tv = random_trajectory(rng, 300, 2, kmax=0.5)
    Aop = build_voxel_operator(tv, spec_v)
    A = Aop.to_dense()
    G = A.conj().T @ A
    tg = build_toeplitz_gram(tv, spec_v)
    for _ in range(5):
        x = complex_normal(rng, 256)
        want = G @ x
        got = tg.apply(x)
        assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)

    gr = build_gridding_operator(tv, spec_v)
    for _ in range(3):
        v = complex_normal(rng, 256)
        want = A @ v
        assert np.linalg.norm(gr.apply(v) - want) \
            <= 1e-3 * np.linalg.norm(want)
        u = complex_normal(rng, 300)
        want_a = A.conj().T @ u
        assert np.linalg.norm(gr.adjoint(u) - want_a) \
            <= 1e-3 * np.linalg.norm(want_a)

    for op, tol in ((Aop, 1e-12), (Hop, 1e-12), (gr, 1e-10)):
        for _ in range(5):
            v = complex_normal(rng, op.ncols)
            u = complex_normal(rng, op.M)
            lhs = np.vdot(u, op.apply(v))
            rhs = np.vdot(op.adjoint(u), v)
            scale = np.linalg.norm(u) * np.linalg.norm(v)
            assert abs(lhs - rhs) <= tol * scale

    elapsed = time.perf_counter() - start
    RECORDED["criterion 3"] = elapsed
    print(f"criterion 3: kernel max err {h_err:.2e}, {elapsed:.1f}s")
    assert elapsed < 60.0


def test_criterion_4_structured_artifacts(artifact_run):
    """On all four trajectory families at least half of the voxel-model
    artifact energy sits in the near-nullspace, and the voxel model puts
    more energy on the k-space axes than the spline model."""
    out, elapsed = artifact_run
    nulls = {r[0]: float(r[1])
             for r in read_rows(out / "null_fractions.csv")[1:]}
    assert set(nulls) == {"radial", "spiral", "rosette", "bpe"}
    axis = {(r[0], r[1]): float(r[2])
            for r in read_rows(out / "axis_ratios.csv")[1:]}
    print(f"criterion 4: null fractions {nulls}, {elapsed:.1f}s")
    for name, frac in nulls.items():
        assert frac >= 0.5, f"{name}: near-nullspace fraction {frac:.3f} < 0.5"
    for name in nulls:
        v, k = axis[(name, "voxel")], axis[(name, "kspace")]
        assert v > k, f"{name}: axis ratio voxel {v:.4f} <= kspace {k:.4f}"
    assert elapsed < 600.0


def test_criterion_5_subspace_energy_maps(subspace_run):
    """Radial mean singular-index maps: spline-model center mean strictly
    below the edge mean; voxel-model center and edge means within 15%."""
    out, elapsed = subspace_run
    vals = {r[0]: (float(r[1]), float(r[2]))
            for r in read_rows(out / "summary.csv")[1:]}
    c_k, e_k = vals["kspace"]
    c_v, e_v = vals["voxel"]
    rel_v = abs(c_v - e_v) / max(c_v, e_v)
    print(f"criterion 5: kspace center/edge {c_k:.1f}/{e_k:.1f}, "
          f"voxel rel diff {100 * rel_v:.1f}%, {elapsed:.1f}s")
    assert c_k < e_k, f"kspace center mean {c_k:.2f} not below edge {e_k:.2f}"
    assert rel_v < 0.15, f"voxel center/edge differ by {100 * rel_v:.1f}%"
    assert elapsed < 600.0


def test_criterion_6_contour_monotonicity():
    """RMS error is nonincreasing in rho at each P, and nonincreasing in P
    for rho >= 1.1, within 0.1 pp slack."""
    start = time.perf_counter()
    base = ModelSpec(kind="kspace", dims=1, N=64, dx=1.0)
    ps = (0, 1, 2, 3, 4, 5)
    rhos = (1.0, 1.05, 1.1, 1.2, 1.3, 1.4, 1.5)
    mat = rms_error_contour(ps, rhos, base, num_x0=129)
    slack = 0.1
    for i, p in enumerate(ps):
        worst = np.max(np.diff(mat[i]))
        assert worst <= slack, f"P={p}: RMS rose by {worst:.3f} pp with rho"
    high = [j for j, rho in enumerate(rhos) if rho >= 1.1]
    for j in high:
        worst = np.max(np.diff(mat[:, j]))
        assert worst <= slack, \
            f"rho={rhos[j]}: RMS rose by {worst:.3f} pp with P"
    elapsed = time.perf_counter() - start
    RECORDED["criterion 6"] = elapsed
    print(f"criterion 6: range {mat.min():.2f}..{mat.max():.2f} pp, "
          f"{elapsed:.1f}s")
    assert elapsed < 300.0


def test_criterion_7_convergence_and_efficiency(recon_run, sense_run):
    """Spiral demo: spline model needs no more iterations to SSIM 0.95 and
    costs less per LSQR iteration at matched sample count. SENSE run:
    iteration counts within 20% across variants, spline per-iteration time
    below the voxel variant."""
    rout, relapsed = recon_run
    iters = {r[0]: float(r[1]) for r in read_rows(rout / "iters.csv")[1:]}
    timing = {r[0]: [float(v) for v in r[1:]]
              for r in read_rows(rout / "timing.csv")[1:]}
    sout, selapsed = sense_run
    st = {r[0]: [float(v) for v in r[1:]]
          for r in read_rows(sout / "timing.csv")[1:]}
    counts = {k: v[0] for k, v in st.items()}
    per = {k: v[3] for k, v in st.items()}
    demo_per = {k: v[2] for k, v in timing.items()}
    print(f"criterion 7: demo iters {iters}, demo per-iter {demo_per}, "
          f"sense counts {counts}, sense per-iter {per}, "
          f"{relapsed + selapsed:.1f}s")
    assert iters["kspace"] <= iters["voxel"], \
        f"iters to SSIM 0.95: kspace {iters['kspace']} > voxel {iters['voxel']}"
    assert timing["kspace"][2] < timing["voxel"][2], \
        "kspace per-iteration time not below voxel in the spiral demo"
    assert max(counts.values()) <= 1.2 * min(counts.values()), \
        f"SENSE iteration counts spread beyond 20%: {counts}"
    assert per["kspace"] < per["voxel"]
    assert per["kspace_centered"] < per["voxel"]
    assert relapsed + selapsed < 900.0


def test_criterion_8_solver_and_oracle_equivalence():
    """CG and LSQR agree to 1e-6 and match a dense direct solve to 1e-8 on a
    64-unknown problem; single-channel SENSE with flat maps and no TV
    reproduces the plain least-squares solution to 1e-4."""
    start = time.perf_counter()
    rng = np.random.default_rng(23)

    N = 64
    spec = ModelSpec(kind="voxel", dims=1, N=N, dx=1.0)
    t = random_trajectory(rng, 150, 1, kmax=0.5)
    A = build_voxel_operator(t, spec)
    d = complex_normal(rng, 150)
    lam = 0.2
    cfg = SolveConfig(max_iters=400, lam=lam, tol=1e-14)
    x_cg = cg_tikhonov(A, d, cfg).coefficients
    x_ls = lsqr_tikhonov(A, d, cfg).coefficients
    Ad = A.to_dense()
    x_dir = np.linalg.solve(Ad.conj().T @ Ad + lam * np.eye(N),
                            Ad.conj().T @ d)
    ref = np.linalg.norm(x_dir)
    cg_vs_lsqr = np.linalg.norm(x_cg - x_ls) / ref
    cg_vs_dir = np.linalg.norm(x_cg - x_dir) / ref
    assert cg_vs_lsqr <= 1e-6, f"CG vs LSQR {cg_vs_lsqr:.2e}"
    assert cg_vs_dir <= 1e-8, f"CG vs direct {cg_vs_dir:.2e}"

    N2, fov = 16, 16.0
    spec2 = ModelSpec(kind="voxel", dims=2, N=N2, dx=1.0)
    t2 = random_trajectory(rng, 768, 2, kmax=0.49)
    d2 = complex_normal(rng, 768)
    maps = make_sensitivities(1, N2, fov, flat=True)
    data = ChannelData(trajectory=t2, data=d2[None, :])
    res = sense_tv_voxel(data, maps, spec2,
                         SolveConfig(max_iters=1500, lam=0.0, tol=1e-13))
    plain = lsqr_tikhonov(build_gridding_operator(t2, spec2), d2,
                          SolveConfig(max_iters=800, lam=0.0,
                                      tol=1e-14)).coefficients
    sense_vs_plain = np.linalg.norm(res.coefficients - plain) \
        / np.linalg.norm(plain)
    assert sense_vs_plain <= 1e-4, f"SENSE vs plain LS {sense_vs_plain:.2e}"

    elapsed = time.perf_counter() - start
    RECORDED["criterion 8"] = elapsed
    print(f"criterion 8: cg/lsqr {cg_vs_lsqr:.2e}, cg/direct {cg_vs_dir:.2e}, "
          f"sense/plain {sense_vs_plain:.2e}, {elapsed:.1f}s")
    assert elapsed < 120.0


def test_criterion_9_multichannel_consistency(sense_run):
    """The three SENSE+TV variants agree pairwise to NRMSE <= 5% inside the
    nominal field of view on the 27-spoke radial problem."""
    out, elapsed = sense_run
    rows = read_rows(out / "nrmse.csv")[1:]
    assert len(rows) == 3
    print(f"criterion 9: NRMSE {dict(rows)}, {elapsed:.1f}s")
    for pair, pct in rows:
        assert float(pct) <= 5.0, f"{pair}: NRMSE {pct}% > 5%"
    assert elapsed < 600.0


def test_total_runtime_budget(artifact_run, subspace_run, recon_run,
                              sense_run):
    """All recorded acceptance runs together stay under 30 minutes."""
    total = sum(RECORDED.values())
    print(f"total recorded acceptance runtime: {total:.1f}s "
          f"({', '.join(f'{k} {v:.1f}s' for k, v in sorted(RECORDED.items()))})")
    assert total < 1800.0, f"acceptance runs took {total:.1f}s"
