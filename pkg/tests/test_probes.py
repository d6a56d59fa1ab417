import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structprobe.probes import (
    BILINEAR_REF,
    LINEAR,
    POLY,
    RBF,
    RBF_ELEMENTWISE,
    RBF_SCALAR,
    SIGMOID,
    Gradients,
    ProbeParams,
    UnsupportedKernelError,
    distance_matrix,
    feature_map,
    init_params,
    load_checkpoint,
    loss_gradient,
    pair_distance,
    save_checkpoint,
    sentence_loss,
    with_kernel,
)
from structprobe.synthetic import random_heads, sentence_from_heads
from structprobe.treebank import TreeDistances, tree_distances

FEATURE_KERNELS = [
    dict(kernel=LINEAR),
    dict(kernel=POLY, c=0.0, p=2),
    dict(kernel=POLY, c=0.5, p=3),
    dict(kernel=RBF, sigma=1.0, rbf_mode=RBF_ELEMENTWISE),
    dict(kernel=RBF, sigma=1.0, rbf_mode=RBF_SCALAR),
    dict(kernel=SIGMOID, a=1.0, b=0.0),
    dict(kernel=SIGMOID, a=0.7, b=-0.2),
]


def make_params(kernel_spec, k=3, n=4, seed=0, scale=0.6):
    rng = np.random.default_rng(seed)
    B = rng.uniform(-scale, scale, size=(k, n))
    return ProbeParams(B=B, **kernel_spec)


def oracle_pair_distance(params, h_i, h_j):
    """Step-by-step scalar-math re-implementation of the predicted distance."""
    k, n = params.B.shape

    def project(h):
        return [sum(params.B[m, q] * h[q] for q in range(n)) for m in range(k)]

    def phi(z):
        if params.kernel == LINEAR:
            return list(z)
        if params.kernel == POLY:
            return [(v + params.c) ** params.p for v in z]
        if params.kernel == SIGMOID:
            return [math.tanh(params.a * v + params.b) for v in z]
        if params.kernel == RBF:
            if params.rbf_mode == RBF_ELEMENTWISE:
                return [math.exp(-(v * v) / (2 * params.sigma**2)) for v in z]
            return [math.exp(-sum(v * v for v in z) / (2 * params.sigma**2))]
        raise AssertionError(params.kernel)

    fi = phi(project(h_i))
    fj = phi(project(h_j))
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(fi, fj)))


def fd_gradient(params, H, gold, step=1e-4):
    """Central finite differences of sentence_loss w.r.t. B."""
    g = np.zeros_like(params.B)
    for m in range(params.B.shape[0]):
        for q in range(params.B.shape[1]):
            plus = params.B.copy()
            plus[m, q] += step
            minus = params.B.copy()
            minus[m, q] -= step
            lp = sentence_loss(replace(params, B=plus), H, gold)
            lm = sentence_loss(replace(params, B=minus), H, gold)
            g[m, q] = (lp - lm) / (2 * step)
    return g


def random_instance(kernel_spec, seed, t_max=5, n_max=8, k_max=4, kink_margin=5e-3):
    """A random (params, H, gold) triple away from the |.| kinks."""
    rng = np.random.default_rng(seed)
    for attempt in range(60):
        t = int(rng.integers(2, t_max + 1))
        n = int(rng.integers(2, n_max + 1))
        k = int(rng.integers(1, k_max + 1))
        params = ProbeParams(B=rng.uniform(-0.7, 0.7, size=(k, n)), **kernel_spec)
        H = rng.normal(size=(t, n))
        gold = tree_distances(sentence_from_heads(random_heads(t, rng), "g"))
        D = distance_matrix(params, H).values
        gaps = np.abs(gold.d - D)[~np.eye(t, dtype=bool)]
        if gaps.min() > kink_margin:
            return params, H, gold
    raise AssertionError("could not sample an instance away from the kinks")


class TestFeatureMap:
    def test_rbf_scalar_at_origin(self):
        params = make_params(dict(kernel=RBF, sigma=1.0, rbf_mode=RBF_SCALAR))
        out = feature_map(params, np.zeros(4))
        assert out.shape == (1,)
        assert out[0] == pytest.approx(1.0, abs=0)

    def test_poly_degenerates_to_linear(self):
        rng = np.random.default_rng(3)
        B = rng.normal(size=(3, 5))
        h = rng.normal(size=5)
        lin = feature_map(ProbeParams(B=B, kernel=LINEAR), h)
        poly = feature_map(ProbeParams(B=B, kernel=POLY, c=0.0, p=1), h)
        assert np.array_equal(lin, poly)

    def test_sigmoid_matches_scalar_math(self):
        params = ProbeParams(B=np.eye(2), kernel=SIGMOID, a=1.0, b=0.0)
        out = feature_map(params, np.array([0.5, -0.5]))
        assert out == pytest.approx([math.tanh(0.5), math.tanh(-0.5)], rel=1e-15)

    def test_shapes(self):
        for spec in FEATURE_KERNELS:
            params = make_params(spec, k=3, n=4)
            out = feature_map(params, np.ones(4))
            expected = 1 if spec.get("rbf_mode") == RBF_SCALAR else 3
            assert out.shape == (expected,)

    def test_bilinear_has_no_feature_map(self):
        params = make_params(dict(kernel=BILINEAR_REF))
        with pytest.raises(UnsupportedKernelError):
            feature_map(params, np.ones(4))


class TestPairDistance:
    def test_identical_inputs_are_distance_zero(self):
        h = np.array([0.3, -1.2, 0.8, 2.0])
        for spec in FEATURE_KERNELS + [dict(kernel=BILINEAR_REF)]:
            params = make_params(spec)
            assert pair_distance(params, h, h) == 0.0

    def test_linear_unit_square_diagonal(self):
        params = ProbeParams(B=np.eye(2), kernel=LINEAR)
        d = pair_distance(params, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert d == pytest.approx(math.sqrt(2), rel=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10**6), spec_idx=st.integers(0, len(FEATURE_KERNELS) - 1))
    def test_matches_step_by_step_oracle(self, seed, spec_idx):
        rng = np.random.default_rng(seed)
        params = make_params(FEATURE_KERNELS[spec_idx], k=3, n=4, seed=seed + 1)
        h_i, h_j = rng.normal(size=4), rng.normal(size=4)
        got = pair_distance(params, h_i, h_j)
        assert got == pytest.approx(oracle_pair_distance(params, h_i, h_j), rel=1e-12, abs=1e-12)

    def test_bilinear_reference_form(self):
        rng = np.random.default_rng(2)
        params = make_params(dict(kernel=BILINEAR_REF), k=3, n=4)
        h_i, h_j = rng.normal(size=4), rng.normal(size=4)
        u, v = params.B @ h_i, params.B @ h_j
        expected = abs(float(u @ u) - 2 * float(u @ v) + float(v @ v))
        assert pair_distance(params, h_i, h_j) == pytest.approx(expected, rel=1e-12)
        # equals the squared Euclidean distance between the projections
        assert pair_distance(params, h_i, h_j) == pytest.approx(
            float(np.sum((u - v) ** 2)), rel=1e-12
        )


class TestMetricAxioms:
    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10**6), spec_idx=st.integers(0, len(FEATURE_KERNELS) - 1))
    def test_pseudometric(self, seed, spec_idx):
        rng = np.random.default_rng(seed)
        params = make_params(FEATURE_KERNELS[spec_idx], k=3, n=4, seed=seed + 1)
        x, y, z = rng.normal(size=(3, 4))
        dxy = pair_distance(params, x, y)
        dyx = pair_distance(params, y, x)
        dxz = pair_distance(params, x, z)
        dyz = pair_distance(params, y, z)
        assert dxy == dyx
        assert dxy >= 0.0
        assert pair_distance(params, x, x) == 0.0
        assert dxz <= dxy + dyz + 1e-9 * max(1.0, dxz)

    @settings(max_examples=80, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10**6))
    def test_rbf_scalar_mode_is_collinear(self, seed):
        rng = np.random.default_rng(seed)
        params = make_params(dict(kernel=RBF, sigma=1.0, rbf_mode=RBF_SCALAR), seed=seed + 1)
        x, y, z = rng.normal(size=(3, 4))
        d = sorted([pair_distance(params, x, y), pair_distance(params, x, z),
                    pair_distance(params, y, z)])
        assert d[2] == pytest.approx(d[0] + d[1], abs=1e-12)


class TestDistanceMatrix:
    def test_single_token(self):
        params = make_params(dict(kernel=LINEAR))
        dm = distance_matrix(params, np.ones((1, 4)))
        assert dm.values.shape == (1, 1)
        assert dm.values[0, 0] == 0.0

    def test_identical_vectors_give_zero_matrix(self):
        params = make_params(dict(kernel=SIGMOID))
        H = np.tile(np.array([0.1, 0.2, 0.3, 0.4]), (3, 1))
        assert np.all(distance_matrix(params, H).values == 0.0)

    def test_matches_pairwise_loop(self):
        rng = np.random.default_rng(7)
        H = rng.normal(size=(4, 4))
        for spec in FEATURE_KERNELS + [dict(kernel=BILINEAR_REF)]:
            params = make_params(spec)
            dm = distance_matrix(params, H).values
            for i in range(4):
                for j in range(4):
                    expected = pair_distance(params, H[i], H[j]) ** 2
                    assert dm[i, j] == pytest.approx(expected, rel=1e-10, abs=1e-12)

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(8)
        H = rng.normal(size=(6, 4))
        for spec in FEATURE_KERNELS:
            dm = distance_matrix(make_params(spec), H).values
            assert np.array_equal(dm, dm.T)
            assert np.all(np.diag(dm) == 0.0)

    def test_poly_c0_p1_equals_linear_matrix(self):
        rng = np.random.default_rng(9)
        B = rng.normal(size=(3, 5))
        H = rng.normal(size=(5, 5))
        lin = distance_matrix(ProbeParams(B=B, kernel=LINEAR), H).values
        poly = distance_matrix(ProbeParams(B=B, kernel=POLY, c=0.0, p=1), H).values
        assert np.array_equal(lin, poly)


def exact_fit_instance():
    """Indicator embeddings with B = I reproduce the tree metric exactly."""
    heads = [0, 1, 1, 2]  # token 1 is root; gold distances are small integers
    sent = sentence_from_heads(heads, "exact")
    gold = tree_distances(sent)
    x = np.zeros((4, 3))
    # root-path edge indicators: edge slots are tokens 2, 3, 4
    x[1, 0] = 1.0
    x[2, 1] = 1.0
    x[3, 0] = x[3, 2] = 1.0
    params = ProbeParams(B=np.eye(3), kernel=LINEAR)
    return params, x, gold


class TestSentenceLoss:
    def test_perfect_fit_loss_zero(self):
        params, H, gold = exact_fit_instance()
        assert np.array_equal(distance_matrix(params, H).values, gold.d.astype(float))
        assert sentence_loss(params, H, gold) == 0.0

    def test_two_token_hand_value(self):
        params = make_params(dict(kernel=LINEAR))
        H = np.tile(np.array([1.0, 2.0, 3.0, 4.0]), (2, 1))  # identical rows -> d_B = 0
        gold = TreeDistances(n=2, d=np.array([[0, 1], [1, 0]]))
        assert sentence_loss(params, H, gold) == pytest.approx(0.5, abs=0)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(11)
        sent = sentence_from_heads(random_heads(5, rng), "r")
        gold = tree_distances(sent)
        H = rng.normal(size=(5, 4))
        params = make_params(dict(kernel=RBF, sigma=1.0, rbf_mode=RBF_ELEMENTWISE))
        base = sentence_loss(params, H, gold)
        perm = rng.permutation(5)
        permuted_gold = TreeDistances(n=5, d=gold.d[np.ix_(perm, perm)])
        assert sentence_loss(params, H[perm], permuted_gold) == pytest.approx(base, rel=1e-12)

    def test_dimension_mismatch(self):
        params = make_params(dict(kernel=LINEAR))
        gold = TreeDistances(n=3, d=np.zeros((3, 3), dtype=int))
        with pytest.raises(ValueError):
            sentence_loss(params, np.ones((2, 4)), gold)

    def test_bilinear_forward_loss_works(self):
        rng = np.random.default_rng(13)
        sent = sentence_from_heads(random_heads(4, rng), "b")
        gold = tree_distances(sent)
        H = rng.normal(size=(4, 4))
        params = make_params(dict(kernel=BILINEAR_REF))
        loss = sentence_loss(params, H, gold)
        D = distance_matrix(params, H).values
        assert loss == pytest.approx(float(np.abs(gold.d - D).sum() / 16), rel=1e-12)


GRAD_KERNELS = [
    dict(kernel=LINEAR),
    dict(kernel=POLY, c=0.0, p=2),
    dict(kernel=RBF, sigma=1.0, rbf_mode=RBF_ELEMENTWISE),
    dict(kernel=RBF, sigma=1.0, rbf_mode=RBF_SCALAR),
    dict(kernel=SIGMOID, a=1.0, b=0.0),
]


class TestLossGradient:
    def test_perfect_fit_gradient_is_zero(self):
        params, H, gold = exact_fit_instance()
        grads = loss_gradient(params, H, gold)
        assert np.all(grads.B == 0.0)

    def test_all_zero_embeddings_linear_gradient_zero(self):
        params = make_params(dict(kernel=LINEAR))
        gold = tree_distances(sentence_from_heads([0, 1, 2], "z"))
        grads = loss_gradient(params, np.zeros((3, 4)), gold)
        assert np.all(grads.B == 0.0)

    @pytest.mark.parametrize("spec", GRAD_KERNELS, ids=lambda s: s["kernel"] + s.get("rbf_mode", ""))
    def test_matches_central_differences(self, spec):
        worst = 0.0
        for seed in range(12):
            params, H, gold = random_instance(spec, seed=seed * 37 + 5)
            analytic = loss_gradient(params, H, gold).B
            numeric = fd_gradient(params, H, gold, step=1e-4)
            scale = max(np.abs(numeric).max(), 1e-8)
            worst = max(worst, np.abs(numeric - analytic).max() / scale)
        assert worst < 1e-4

    def test_sigmoid_ab_gradients_match_differences(self):
        spec = dict(kernel=SIGMOID, a=0.8, b=0.1)
        params, H, gold = random_instance(spec, seed=123)
        grads = loss_gradient(params, H, gold, wrt_ab=True)
        step = 1e-5
        for name in ("a", "b"):
            plus = replace(params, **{name: getattr(params, name) + step})
            minus = replace(params, **{name: getattr(params, name) - step})
            fd = (sentence_loss(plus, H, gold) - sentence_loss(minus, H, gold)) / (2 * step)
            assert getattr(grads, name) == pytest.approx(fd, rel=1e-3, abs=1e-7)

    def test_single_token_sentence_zero_gradient(self):
        params = make_params(dict(kernel=LINEAR))
        gold = TreeDistances(n=1, d=np.zeros((1, 1), dtype=int))
        grads = loss_gradient(params, np.ones((1, 4)), gold)
        assert np.all(grads.B == 0.0)

    def test_bilinear_gradient_unsupported(self):
        params = make_params(dict(kernel=BILINEAR_REF))
        gold = tree_distances(sentence_from_heads([0, 1], "u"))
        with pytest.raises(UnsupportedKernelError):
            loss_gradient(params, np.ones((2, 4)), gold)


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        params = init_params(dim=6, rank=3, kernel=SIGMOID, seed=4, a=0.9, b=-0.1)
        # store float32-exact values so the round trip is bit-identical
        params = ProbeParams(B=params.B.astype(np.float32).astype(np.float64),
                             kernel=params.kernel, a=params.a, b=params.b)
        path = tmp_path / "probe.ckpt"
        save_checkpoint(params, path, meta={"best_epoch": 7, "layer": 2})
        loaded, meta = load_checkpoint(path)
        assert np.array_equal(loaded.B, params.B)
        assert loaded.kernel == SIGMOID
        assert (loaded.a, loaded.b) == (0.9, -0.1)
        assert meta == {"best_epoch": 7, "layer": 2}

    def test_deterministic_bytes(self, tmp_path):
        params = init_params(dim=5, rank=2, kernel=RBF, seed=1)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(params, p1, meta={"layer": 0})
        save_checkpoint(params, p2, meta={"layer": 0})
        assert p1.read_bytes() == p2.read_bytes()

    def test_save_load_save_identical(self, tmp_path):
        params = init_params(dim=5, rank=2, kernel=POLY, seed=2, c=0.0, p=2)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(params, p1, meta={})
        loaded, _ = load_checkpoint(p1)
        save_checkpoint(loaded, p2, meta={})
        assert p1.read_bytes() == p2.read_bytes()


class TestInitAndHelpers:
    def test_init_range_and_determinism(self):
        a = init_params(dim=10, rank=4, seed=42)
        b = init_params(dim=10, rank=4, seed=42)
        assert np.array_equal(a.B, b.B)
        assert np.abs(a.B).max() <= 0.05
        assert a.B.shape == (4, 10)

    def test_default_rank_is_128(self):
        assert init_params(dim=4).rank == 128

    def test_with_kernel_swaps_forward_only(self):
        params = init_params(dim=4, rank=2, kernel=LINEAR, seed=0)
        swapped = with_kernel(params, BILINEAR_REF)
        assert swapped.kernel == BILINEAR_REF
        assert np.array_equal(swapped.B, params.B)

    def test_invalid_hyperparameters_rejected(self):
        with pytest.raises(ValueError):
            ProbeParams(B=np.eye(2), kernel="mystery")
        with pytest.raises(ValueError):
            ProbeParams(B=np.eye(2), kernel=RBF, sigma=0.0)
        with pytest.raises(ValueError):
            ProbeParams(B=np.eye(2), kernel=POLY, p=0)
        with pytest.raises(ValueError):
            ProbeParams(B=np.eye(2), kernel=POLY, c=-1.0)
        with pytest.raises(ValueError):
            ProbeParams(B=np.eye(2), rbf_mode="diagonal")
