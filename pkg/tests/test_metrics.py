import pytest
import torch

from stitchviz.core import ShapeMismatchError
from stitchviz.metrics import (
    MetricConfig,
    compute_metrics,
    cosine_similarity_pixelwise,
    gram_cosine,
    gram_matrix,
    l1_mean,
)

from oracles import cosine_pixelwise_loops, gram_cosine_flat, gram_loops, l1_mean_loops


def rand_pair(seed, shape=(4, 3, 3)):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(shape, generator=g), torch.randn(shape, generator=g)


class TestCosine:
    def test_self_similarity(self):
        a, _ = rand_pair(0)
        assert abs(cosine_similarity_pixelwise(a, a) - 1.0) < 1e-6

    def test_antipodal(self):
        a, _ = rand_pair(1)
        assert abs(cosine_similarity_pixelwise(a, -a) + 1.0) < 1e-6

    def test_matches_loop_oracle(self):
        a, b = rand_pair(2)
        assert abs(cosine_similarity_pixelwise(a, b) - cosine_pixelwise_loops(a, b)) < 1e-6

    def test_per_pixel_scale_invariance(self):
        a, _ = rand_pair(3)
        for c in (0.5, 2.0, 117.0):
            assert abs(cosine_similarity_pixelwise(a, c * a) - 1.0) < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            cosine_similarity_pixelwise(torch.zeros(2, 2, 2), torch.zeros(2, 3, 3))

    def test_epsilon_guards_zero_vectors(self):
        z = torch.zeros(3, 2, 2)
        assert cosine_similarity_pixelwise(z, z) == 0.0


class TestL1:
    def test_zero_on_equal(self):
        a, _ = rand_pair(4)
        assert l1_mean(a, a) == 0.0

    def test_constant_shift(self):
        a, _ = rand_pair(5)
        for c in (0.25, -1.5):
            assert abs(l1_mean(a, a + c) - abs(c)) < 1e-7

    def test_matches_loop_oracle(self):
        a, b = rand_pair(6)
        assert abs(l1_mean(a, b) - l1_mean_loops(a, b)) < 1e-7


class TestGram:
    def test_ones_single_channel(self):
        g = gram_matrix(torch.ones(1, 2, 2))
        assert g.shape == (1, 1) and float(g[0, 0]) == 4.0

    def test_disjoint_supports_are_diagonal(self):
        a = torch.zeros(2, 2, 2)
        a[0, 0, 0] = 3.0
        a[1, 1, 1] = 2.0
        g = gram_matrix(a)
        assert float(g[0, 1]) == 0.0 and float(g[1, 0]) == 0.0

    def test_matches_loop_oracle_relative(self):
        a, _ = rand_pair(7, (3, 4, 4))
        g = gram_matrix(a)
        ref = gram_loops(a)
        rel = float((g - ref).abs().max() / ref.abs().max())
        assert rel < 1e-5

    def test_symmetric_psd(self):
        a, _ = rand_pair(8, (5, 3, 3))
        g = gram_matrix(a)
        assert torch.allclose(g, g.T)
        assert float(torch.linalg.eigvalsh(g).min()) > -1e-8


class TestGramCosine:
    def test_self(self):
        a, _ = rand_pair(9)
        assert abs(gram_cosine(a, a) - 1.0) < 1e-6

    def test_spatial_permutation_position_free(self):
        a, _ = rand_pair(10, (3, 4, 4))
        g = torch.Generator().manual_seed(0)
        perm = torch.randperm(16, generator=g)
        pa = a.reshape(3, -1)[:, perm].reshape(3, 4, 4)
        assert abs(gram_cosine(a, pa) - 1.0) < 1e-6

    def test_channel_permutation_invariance(self):
        a, b = rand_pair(11, (5, 3, 3))
        perm = torch.tensor([3, 0, 4, 1, 2])
        assert abs(gram_cosine(a[perm], b[perm]) - gram_cosine(a, b)) < 1e-6

    def test_matches_flatten_cosine_oracle(self):
        a, b = rand_pair(12)
        assert abs(gram_cosine(a, b) - gram_cosine_flat(a, b)) < 1e-6

    def test_different_spatial_sizes_allowed(self):
        g = torch.Generator().manual_seed(13)
        a = torch.randn((4, 3, 3), generator=g)
        b = torch.randn((4, 6, 5), generator=g)
        value = gram_cosine(a, b)
        assert -1.0 - 1e-9 <= value <= 1.0 + 1e-9

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ShapeMismatchError):
            gram_cosine(torch.zeros(2, 2, 2), torch.zeros(3, 2, 2))


class TestRandomizedOracleSweep:
    """The acceptance criterion runs 200 shapes; this is a faster spot check."""

    def test_forty_random_tensors(self):
        g = torch.Generator().manual_seed(99)
        for trial in range(40):
            c = int(torch.randint(1, 9, (1,), generator=g))
            h = int(torch.randint(1, 7, (1,), generator=g))
            w = int(torch.randint(1, 7, (1,), generator=g))
            a = torch.randn((c, h, w), generator=g)
            b = torch.randn((c, h, w), generator=g)
            assert abs(cosine_similarity_pixelwise(a, b) - cosine_pixelwise_loops(a, b)) < 1e-6
            assert abs(l1_mean(a, b) - l1_mean_loops(a, b)) < 1e-7
            assert abs(gram_cosine(a, b) - gram_cosine_flat(a, b)) < 1e-6


class TestConfig:
    def test_epsilon_positive(self):
        with pytest.raises(ValueError):
            MetricConfig(epsilon=0.0)

    def test_compute_metrics_bundle(self):
        a, b = rand_pair(14)
        out = compute_metrics(a, b)
        assert set(out) == {"cosine", "gram_cosine", "l1"}
        with pytest.raises(KeyError):
            compute_metrics(a, b, names=("nope",))
