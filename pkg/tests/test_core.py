import json

import pytest
import torch

from stitchviz.core import (
    ActivationTensor,
    ImageTensor,
    LayerAddress,
    LayerRole,
    NormalizationSpec,
    RunManifest,
    ShapeMismatchError,
    ValueSpace,
    config_hash,
    from_unit_tensor,
    nearest_resize,
    nearest_resize_tensor,
    strip_volatile,
    to_unit_tensor,
)

from oracles import nearest_resize_loops

ADDR = LayerAddress("m", "stage1", LayerRole.ENCODER_LAYER, 2)


def act(data):
    return ActivationTensor(data, ADDR)


class TestNearestResize:
    def test_upscale_14_to_32(self):
        a = act(torch.randn(5, 14, 14))
        out = nearest_resize(a, 32, 32)
        assert out.data.shape == (5, 32, 32)
        # every output pixel is an exact copy of some input pixel
        assert all(v in set(a.data.flatten().tolist()) for v in out.data.flatten().tolist()[:50])

    def test_identity_when_same_size(self):
        a = act(torch.randn(3, 8, 8))
        out = nearest_resize(a, 8, 8)
        assert torch.equal(out.data, a.data)

    def test_2x2_block_replication(self):
        a = act(torch.tensor([[[1.0, 2.0], [3.0, 4.0]]]))
        out = nearest_resize(a, 4, 4).data
        expected = torch.tensor([[[1.0, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]]])
        assert torch.equal(out, expected)

    @pytest.mark.parametrize("shape,target", [((2, 5, 7), (11, 4)), ((1, 3, 3), (9, 9)),
                                              ((4, 8, 8), (3, 5)), ((1, 6, 2), (2, 6))])
    def test_matches_loop_oracle(self, shape, target):
        g = torch.Generator().manual_seed(hash((shape, target)) % 2**31)
        a = act(torch.randn(shape, generator=g))
        out = nearest_resize(a, *target)
        assert torch.equal(out.data, nearest_resize_loops(a.data, *target))

    def test_up_down_round_trip_exact(self):
        for h, w in [(3, 5), (8, 8), (6, 2)]:
            a = act(torch.randn(2, h, w))
            up = nearest_resize(a, 2 * h, 2 * w)
            down = nearest_resize(up, h, w)
            assert torch.equal(down.data, a.data)

    def test_rejects_bad_target(self):
        with pytest.raises(ValueError):
            nearest_resize_tensor(torch.randn(1, 4, 4), 0, 4)


class TestValueSpaces:
    def test_range_endpoints(self):
        spec = NormalizationSpec("range", lo=-1.0, hi=1.0)
        native = torch.tensor([[[-1.0]], [[0.0]], [[1.0]]])
        unit = to_unit_tensor(native, spec)
        assert torch.allclose(unit, torch.tensor([[[0.0]], [[0.5]], [[1.0]]]))

    def test_meanstd_round_trip_fixpoint(self):
        spec = NormalizationSpec("meanstd", mean=(0.5, 0.4, 0.3), std=(0.2, 0.25, 0.3))
        g = torch.Generator().manual_seed(7)
        unit = torch.rand((3, 5, 5), generator=g)
        native = from_unit_tensor(unit, spec)
        back = to_unit_tensor(native, spec)
        assert (back - unit).abs().max() < 1e-6

    def test_round_trip_random_specs(self):
        g = torch.Generator().manual_seed(3)
        for spec in [NormalizationSpec("unit"),
                     NormalizationSpec("range", lo=-2.0, hi=3.0),
                     NormalizationSpec("meanstd", mean=(0.1, 0.2, 0.3), std=(1.0, 2.0, 0.5))]:
            unit = torch.rand((3, 4, 4), generator=g)
            assert (to_unit_tensor(from_unit_tensor(unit, spec), spec) - unit).abs().max() < 1e-6

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            NormalizationSpec("weird")


class TestDomainTypes:
    def test_image_requires_three_channels(self):
        with pytest.raises(ShapeMismatchError):
            ImageTensor(torch.zeros(1, 4, 4))

    def test_unit_image_range_checked(self):
        with pytest.raises(ValueError):
            ImageTensor(torch.full((3, 2, 2), 1.5), ValueSpace.UNIT)
        ImageTensor(torch.full((3, 2, 2), 1.5), ValueSpace.MODEL_NATIVE)  # fine

    def test_unit_constructor_clamps(self):
        img = ImageTensor.unit(torch.full((3, 2, 2), 1.0 + 1e-7))
        assert float(img.data.max()) <= 1.0

    def test_activation_must_be_finite(self):
        bad = torch.zeros(2, 2, 2)
        bad[0, 0, 0] = float("nan")
        with pytest.raises(ValueError):
            ActivationTensor(bad, ADDR)

    def test_layer_address_distance_nonnegative(self):
        with pytest.raises(ValueError):
            LayerAddress("m", "l", LayerRole.ENCODER_LAYER, -1)


class TestManifest:
    def test_config_hash_deterministic_and_order_free(self):
        assert config_hash({"a": 1, "b": [2, 3]}) == config_hash({"b": [2, 3], "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_run_ids_unique(self):
        m1 = RunManifest(config={"x": 1})
        m2 = RunManifest(config={"x": 1})
        assert m1.run_id != m2.run_id
        assert m1.config_hash == m2.config_hash

    def test_save_round_trip(self, tmp_path):
        m = RunManifest(config={"x": 1}, model_ids=["a"], seeds=[0, 1])
        path = tmp_path / "m.json"
        m.save(path)
        with open(path) as f:
            loaded = json.load(f)
        assert loaded["config_hash"] == m.config_hash
        assert loaded["seeds"] == [0, 1]

    def test_strip_volatile(self):
        doc = {"run_id": "x", "wall_time_s": 1.0, "nested": [{"created_at": "t", "v": 3}], "keep": 1}
        assert strip_volatile(doc) == {"nested": [{"v": 3}], "keep": 1}
