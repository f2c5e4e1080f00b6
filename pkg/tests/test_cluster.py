import numpy as np
import pytest

from sketchpipe import (
    Assignments,
    CenterSet,
    ParameterError,
    PreconditionSpec,
    SamplingPlan,
    SparseSketch,
    clustering_accuracy,
    feature_extraction_baseline,
    feature_selection_exact_svd,
    gen_clusters,
    kmeans_pp_init,
    lloyd_full,
    precondition_columns,
    sketch_stream,
    sparsified_assign,
    sparsified_kmeans,
    sparsified_kmeans_two_pass,
    sparsified_update_centers,
)
from sketchpipe.cluster import _restart_rng
from sketchpipe.sketch import ArraySource, plan_for


def full_sketch(X, kind="none", sign_seed=0, master_seed=0):
    p = X.shape[0]
    spec = PreconditionSpec.create(kind, p, sign_seed=sign_seed)
    plan = SamplingPlan(master_seed=master_seed, p=spec.p_pad, m=spec.p_pad)
    return sketch_stream(X, spec, plan)


def test_kmeans_pp_single_center():
    X = np.random.default_rng(0).standard_normal((4, 10))
    cs = kmeans_pp_init(X, 1, seed=3)
    assert cs.K == 1
    assert any(np.array_equal(cs.centers[:, 0], X[:, j]) for j in range(10))


def test_kmeans_pp_all_points():
    X = np.random.default_rng(1).standard_normal((3, 6))
    cs = kmeans_pp_init(X, 6, seed=5)
    got = sorted(tuple(np.round(c, 9)) for c in cs.centers.T)
    want = sorted(tuple(np.round(c, 9)) for c in X.T)
    assert got == want


def test_kmeans_pp_errors():
    X = np.zeros((2, 3))
    with pytest.raises(ParameterError):
        kmeans_pp_init(X, 4, seed=0)
    with pytest.raises(ParameterError):
        kmeans_pp_init(X, 0, seed=0)


def test_kmeans_pp_singleton_clusters_one_per_cluster():
    # three far-apart points: the seeding always picks all three
    X = np.array([[0.0, 100.0, -100.0], [0.0, 100.0, 100.0]])
    for seed in range(50):
        cs = kmeans_pp_init(X, 3, seed=seed)
        cols = {tuple(c) for c in cs.centers.T}
        assert len(cols) == 3


def test_kmeans_pp_second_pick_follows_d2_law():
    # three collinear points at 0, 1, 10: given the first pick is point 0,
    # the second is point 2 with probability 100/101
    X = np.array([[0.0, 1.0, 10.0]])
    picks = {1: 0, 2: 0}
    total = 0
    for seed in range(4000):
        cs = kmeans_pp_init(X, 2, seed=seed)
        first = cs.centers[0, 0]
        if first != 0.0:
            continue
        second = cs.centers[0, 1]
        picks[1 if second == 1.0 else 2] += 1
        total += 1
    frac = picks[2] / total
    expect = 100.0 / 101.0
    sigma = np.sqrt(expect * (1 - expect) / total)
    assert abs(frac - expect) <= 4 * sigma


def test_kmeans_pp_sparse_matches_dense_at_full_sampling():
    X = np.random.default_rng(2).standard_normal((16, 40))
    sk = full_sketch(X)
    for seed in (0, 1, 2):
        dense = kmeans_pp_init(X, 4, seed=seed)
        sparse = kmeans_pp_init(sk, 4, seed=seed)
        assert np.allclose(dense.centers, sparse.centers)
    assert sparse.domain == "preconditioned"


def test_lloyd_single_cluster_is_mean_and_variance():
    X = np.random.default_rng(3).standard_normal((5, 30))
    res = lloyd_full(X, 1, n_init=2, seed=0)
    assert np.allclose(res.centers.centers[:, 0], X.mean(axis=1), atol=1e-12)
    total_var = ((X - X.mean(axis=1, keepdims=True)) ** 2).sum()
    assert np.isclose(res.objective, total_var)


def test_lloyd_two_points_two_clusters():
    X = np.array([[0.0, 5.0], [0.0, 5.0]])
    res = lloyd_full(X, 2, n_init=2, seed=1)
    assert res.objective < 1e-20
    assert sorted(res.assignments.labels.tolist()) == [0, 1]


def test_lloyd_errors():
    with pytest.raises(ParameterError):
        lloyd_full(np.zeros((3, 2)), 4)
    with pytest.raises(ParameterError):
        lloyd_full(np.zeros((3, 0)), 1)


def test_lloyd_objective_non_increasing():
    X, _ = gen_clusters(16, 200, 3, separation=4.0, noise_sigma=1.0, seed=4)
    res = lloyd_full(X, 3, n_init=3, seed=2)
    curve = res.diagnostics["objective_curve"]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(curve, curve[1:]))


def test_sparsified_assign_hand_instance():
    # column supports coordinates {0, 2} with values (1, 2); distances are
    # evaluated only there
    spec = PreconditionSpec.create("none", 4)
    sk = SparseSketch(
        spec=spec, n=1,
        indices=np.array([[0, 2]], dtype=np.uint32),
        values=np.array([[1.0, 2.0]]),
    )
    centers = CenterSet(
        K=2,
        centers=np.array([[1.0, 0.0], [9.0, 9.0], [2.5, 2.0], [9.0, 9.0]]),
        domain="preconditioned",
    )
    # d(0)^2 = 0 + 0.25, d(1)^2 = 1 + 0 -> cluster 0
    assert sparsified_assign(sk, 0, centers) == 0


def test_sparsified_assign_tie_breaks_low_index():
    spec = PreconditionSpec.create("none", 2)
    sk = SparseSketch(
        spec=spec, n=1,
        indices=np.array([[0, 1]], dtype=np.uint32),
        values=np.array([[0.0, 0.0]]),
    )
    centers = CenterSet(K=3, centers=np.ones((2, 3)), domain="preconditioned")
    assert sparsified_assign(sk, 0, centers) == 0


def test_sparsified_assign_single_cluster():
    spec = PreconditionSpec.create("none", 3)
    sk = SparseSketch(
        spec=spec, n=1,
        indices=np.array([[1, 2]], dtype=np.uint32),
        values=np.array([[4.0, 5.0]]),
    )
    centers = CenterSet(K=1, centers=np.zeros((3, 1)), domain="preconditioned")
    assert sparsified_assign(sk, 0, centers) == 0


def test_sparsified_assign_full_sampling_matches_dense():
    X = np.random.default_rng(5).standard_normal((8, 25))
    sk = full_sketch(X)
    mu = np.random.default_rng(6).standard_normal((8, 3))
    centers = CenterSet(K=3, centers=mu, domain="preconditioned")
    d2 = ((X[:, :, None] - mu[:, None, :]) ** 2).sum(axis=0)
    for i in range(25):
        assert sparsified_assign(sk, i, centers) == int(np.argmin(d2[i]))


def test_sparsified_update_full_sampling_exact_means():
    X = np.random.default_rng(7).standard_normal((6, 20))
    sk = full_sketch(X)
    labels = np.random.default_rng(8).integers(0, 3, 20)
    centers, counts = sparsified_update_centers(sk, Assignments(labels=labels), K=3)
    for k in range(3):
        assert np.allclose(centers.centers[:, k], X[:, labels == k].mean(axis=1))
    assert centers.domain == "preconditioned"
    n_k = np.bincount(labels, minlength=3)
    assert np.array_equal(counts.counts.sum(axis=0), 6 * n_k)


def test_sparsified_update_single_sparse_column():
    spec = PreconditionSpec.create("none", 4)
    sk = SparseSketch(
        spec=spec, n=1,
        indices=np.array([[1, 3]], dtype=np.uint32),
        values=np.array([[7.0, -2.0]]),
    )
    centers, counts = sparsified_update_centers(sk, Assignments(labels=np.array([0])), K=1)
    assert np.array_equal(centers.centers[:, 0], [0.0, 7.0, 0.0, -2.0])
    assert np.array_equal(counts.counts[:, 0], [0, 1, 0, 1])


def test_sparsified_update_hand_instance():
    # p=4, m=2, n=3, one cluster; entry-wise means over sampling counts
    spec = PreconditionSpec.create("none", 4)
    sk = SparseSketch(
        spec=spec, n=3,
        indices=np.array([[0, 1], [0, 2], [1, 3]], dtype=np.uint32),
        values=np.array([[1.0, 2.0], [3.0, 4.0], [6.0, 8.0]]),
    )
    centers, counts = sparsified_update_centers(sk, Assignments(labels=np.zeros(3, int)), K=1)
    assert np.array_equal(centers.centers[:, 0], [2.0, 4.0, 4.0, 8.0])
    assert np.array_equal(counts.counts[:, 0], [2, 2, 1, 1])
    assert counts.counts.sum() == 2 * 3


def test_sparsified_update_zero_count_keeps_previous():
    spec = PreconditionSpec.create("none", 3)
    sk = SparseSketch(
        spec=spec, n=1,
        indices=np.array([[0, 1]], dtype=np.uint32),
        values=np.array([[5.0, 6.0]]),
    )
    prev = CenterSet(K=1, centers=np.array([[9.0], [9.0], [9.0]]), domain="preconditioned")
    centers, _ = sparsified_update_centers(
        sk, Assignments(labels=np.array([0])), K=1, prev_centers=prev
    )
    assert np.array_equal(centers.centers[:, 0], [5.0, 6.0, 9.0])


def test_sparsified_update_empty_cluster_keeps_previous():
    spec = PreconditionSpec.create("none", 2)
    sk = SparseSketch(
        spec=spec, n=2,
        indices=np.array([[0, 1], [0, 1]], dtype=np.uint32),
        values=np.array([[1.0, 1.0], [3.0, 3.0]]),
    )
    prev = CenterSet(K=2, centers=np.array([[4.0, 7.0], [4.0, 7.0]]), domain="preconditioned")
    centers, counts = sparsified_update_centers(
        sk, Assignments(labels=np.array([0, 0])), K=2, prev_centers=prev
    )
    assert np.array_equal(centers.centers[:, 1], [7.0, 7.0])
    assert counts.counts[:, 1].sum() == 0


def test_count_diagonal_hk_deviation_matches_direct():
    X = np.random.default_rng(9).standard_normal((10, 60))
    spec = PreconditionSpec.create("none", 10)
    plan = plan_for(spec, 0.4, master_seed=17)
    sk = sketch_stream(X, spec, plan)
    labels = np.random.default_rng(10).integers(0, 2, 60)
    _, counts = sparsified_update_centers(sk, Assignments(labels=labels), K=2)
    devs = counts.hk_deviations(plan.m)
    for k in range(2):
        n_k = int((labels == k).sum())
        H = np.zeros(10)
        for i in np.flatnonzero(labels == k):
            H[sk.indices[i].astype(int)] += 1.0
        H *= 10 / (plan.m * n_k)
        assert np.isclose(devs[k], np.abs(H - 1.0).max())


def test_sparsified_reduces_to_lloyd_at_gamma_one():
    X, _ = gen_clusters(32, 300, 4, separation=8.0, noise_sigma=1.0, seed=11)
    dense = lloyd_full(X, 4, n_init=4, seed=12)
    sparse = sparsified_kmeans(X, 4, gamma=1.0, kind="none", n_init=4, seed=12)
    assert np.array_equal(dense.assignments.labels, sparse.assignments.labels)
    assert np.allclose(
        dense.diagnostics["objective_curve"], sparse.diagnostics["objective_curve"]
    )
    assert np.allclose(dense.centers.centers, sparse.centers.centers, atol=1e-10)


def test_sparsified_objective_non_increasing():
    rng = np.random.default_rng(13)
    for trial in range(5):
        p = int(rng.integers(8, 48))
        X = rng.standard_normal((p, 150))
        res = sparsified_kmeans(
            X, int(rng.integers(2, 5)), gamma=float(rng.uniform(0.2, 0.9)),
            n_init=1, seed=trial, kind="hadamard",
        )
        curve = res.diagnostics["objective_curve"]
        assert all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(curve, curve[1:]))


def test_sparsified_single_pass_and_centers_domain():
    X, truth = gen_clusters(24, 500, 3, separation=12.0, noise_sigma=1.0, seed=14)
    src = ArraySource(X, chunk_cols=64)
    res = sparsified_kmeans(src, 3, gamma=0.4, n_init=3, seed=15)
    assert src.passes == 1
    assert res.diagnostics["passes"] == 1
    assert res.centers.domain == "original"
    assert res.centers.centers.shape == (24, 3)
    assert clustering_accuracy(res.assignments.labels, truth) > 0.95


def test_sparsified_deterministic():
    X, _ = gen_clusters(16, 120, 3, separation=6.0, noise_sigma=1.0, seed=16)
    a = sparsified_kmeans(X, 3, gamma=0.5, n_init=2, seed=17)
    b = sparsified_kmeans(X, 3, gamma=0.5, n_init=2, seed=17)
    assert np.array_equal(a.assignments.labels, b.assignments.labels)
    assert np.array_equal(a.centers.centers, b.centers.centers)
    assert a.diagnostics["iterations"] == b.diagnostics["iterations"]


def test_sparsified_gamma_errors():
    X = np.zeros((10, 5))
    with pytest.raises(ParameterError):
        sparsified_kmeans(X, 2, gamma=0.0)
    with pytest.raises(ParameterError):
        sparsified_kmeans(X, 9, gamma=0.5)


def test_two_pass_counts_two_passes_and_refines():
    X, truth = gen_clusters(24, 400, 3, separation=10.0, noise_sigma=1.0, seed=18)
    src = ArraySource(X, chunk_cols=100)
    res = sparsified_kmeans_two_pass(src, 3, gamma=0.3, n_init=3, seed=19)
    assert src.passes == 2
    assert res.diagnostics["passes"] == 2
    assert clustering_accuracy(res.assignments.labels, truth) > 0.98


def test_two_pass_semantics_exact():
    # pass 2 must average first-pass clusters and re-assign against the
    # first-pass centers, nothing more
    X, _ = gen_clusters(12, 200, 3, separation=8.0, noise_sigma=1.0, seed=20)
    first = sparsified_kmeans(X, 3, gamma=0.4, n_init=2, seed=21)
    second = sparsified_kmeans_two_pass(X, 3, gamma=0.4, n_init=2, seed=21)
    lab1 = first.assignments.labels
    mu_hat = first.centers.centers
    for k in range(3):
        expect = X[:, lab1 == k].mean(axis=1)
        assert np.allclose(second.centers.centers[:, k], expect, atol=1e-12)
    d2 = ((X[:, :, None] - mu_hat[:, None, :]) ** 2).sum(axis=0)
    assert np.array_equal(second.assignments.labels, np.argmin(d2, axis=1))


def test_two_pass_gamma_one_is_one_extra_lloyd_step():
    X, _ = gen_clusters(16, 150, 3, separation=8.0, noise_sigma=1.0, seed=22)
    dense = lloyd_full(X, 3, n_init=3, seed=23)
    two = sparsified_kmeans_two_pass(X, 3, gamma=1.0, kind="none", n_init=3, seed=23)
    # converged state: means of final labels then re-assignment change nothing
    assert np.array_equal(two.assignments.labels, dense.assignments.labels)
    for k in range(3):
        expect = X[:, dense.assignments.labels == k].mean(axis=1)
        assert np.allclose(two.centers.centers[:, k], expect, atol=1e-10)


def test_two_pass_centers_match_class_means():
    X, truth = gen_clusters(20, 600, 4, separation=14.0, noise_sigma=1.0, seed=24)
    res = sparsified_kmeans_two_pass(X, 4, gamma=0.3, n_init=3, seed=25)
    acc = clustering_accuracy(res.assignments.labels, truth)
    assert acc > 0.99
    # compare each center against the exact mean of the matching true class
    for k in range(4):
        center = res.centers.centers[:, k]
        best = min(
            np.linalg.norm(center - X[:, truth == c].mean(axis=1))
            for c in range(4)
        )
        assert best <= 0.1 * np.linalg.norm(center)


def test_feature_extraction_full_dimension_keeps_quality():
    X, truth = gen_clusters(16, 300, 3, separation=10.0, noise_sigma=1.0, seed=26)
    res = feature_extraction_baseline(X, 3, m=16, n_init=3, seed=27)
    assert clustering_accuracy(res.assignments.labels, truth) >= 0.99
    assert res.diagnostics["passes"] == 2


def test_feature_extraction_pinv_centers_not_consistent():
    # the pseudo-inverse center estimate has a residual that does not vanish
    # as n grows, because a single shared projection loses rank
    p, K, m = 32, 2, 8
    for n in (200, 2000):
        X, truth = gen_clusters(p, n, K, separation=20.0, noise_sigma=0.5, seed=28)
        res = feature_extraction_baseline(
            X, K, m, n_init=3, seed=29, recompute_centers=False
        )
        assert res.diagnostics["passes"] == 1
        rel = []
        for k in range(K):
            center = res.centers.centers[:, k]
            best = min(
                np.linalg.norm(center - X[:, truth == c].mean(axis=1))
                / np.linalg.norm(X[:, truth == c].mean(axis=1))
                for c in range(K)
            )
            rel.append(best)
        assert min(rel) > 0.2, (n, rel)


def test_feature_selection_stand_in_runs():
    X, truth = gen_clusters(16, 250, 3, separation=12.0, noise_sigma=1.0, seed=30)
    res = feature_selection_exact_svd(X, 3, m=8, n_init=3, seed=31)
    assert clustering_accuracy(res.assignments.labels, truth) > 0.9


def test_clustering_accuracy_examples():
    labels = np.array([0, 1, 2, 0, 1, 2])
    assert clustering_accuracy(labels, labels) == 1.0
    perm = np.array([2, 0, 1, 2, 0, 1])
    assert clustering_accuracy(perm, labels) == 1.0
    flipped = labels.copy()
    flipped[0] = 1
    assert np.isclose(clustering_accuracy(flipped, labels), 5 / 6)
    with pytest.raises(ParameterError):
        clustering_accuracy(labels, labels[:3])


def test_restart_rng_deterministic():
    a = _restart_rng(5, 2).integers(0, 1000, 4)
    b = _restart_rng(5, 2).integers(0, 1000, 4)
    assert np.array_equal(a, b)


def sparsified_center_error(X, gamma, seed):
    # center estimate for a single known cluster via the counts-weighted
    # entry-wise means, mapped back to the original domain
    p, n = X.shape
    spec = PreconditionSpec.create("hadamard", p, sign_seed=seed)
    plan = plan_for(spec, gamma, master_seed=seed ^ 0x1234)
    sk = sketch_stream(X, spec, plan)
    centers, _ = sparsified_update_centers(
        sk, Assignments(labels=np.zeros(n, dtype=int)), K=1
    )
    from sketchpipe import unprecondition

    mu = unprecondition(centers.centers[:, 0], spec)[:p]
    return np.linalg.norm(mu - X.mean(axis=1)) / np.sqrt(p)


def test_sparsified_center_estimate_is_consistent():
    # error decays with the cluster size: slope of log error vs log n_k
    # must be at most -0.4
    p, gamma = 64, 0.25
    rng = np.random.default_rng(40)
    mu = rng.standard_normal(p) * 3.0
    sizes = (100, 1000, 10000)
    errs = []
    for n_k in sizes:
        runs = [
            sparsified_center_error(
                mu[:, None] + np.random.default_rng([41, n_k, r]).standard_normal((p, n_k)),
                gamma,
                seed=100 + r,
            )
            for r in range(3)
        ]
        errs.append(np.mean(runs))
    slope = np.polyfit(np.log(sizes), np.log(errs), 1)[0]
    assert slope <= -0.4, (errs, slope)


def test_feature_extraction_center_error_plateaus():
    # with one shared projection the center error stops improving with n_k
    p, m = 64, 16
    rng = np.random.default_rng(42)
    mu = rng.standard_normal(p) * 3.0
    omega = (rng.integers(0, 2, size=(m, p)) * 2.0 - 1.0) / np.sqrt(m)
    pinv = np.linalg.pinv(omega)
    errs = {}
    for n_k in (100, 1000, 10000):
        X = mu[:, None] + np.random.default_rng([43, n_k]).standard_normal((p, n_k))
        est = pinv @ (omega @ X.mean(axis=1))
        errs[n_k] = np.linalg.norm(est - X.mean(axis=1)) / np.sqrt(p)
    # bounded away from zero by the rank deficiency, and not improving
    assert errs[10000] > 0.25 * np.linalg.norm(mu) / np.sqrt(p)
    assert errs[10000] >= 0.8 * errs[1000]
