import numpy as np
import pytest
import torch

from gridtrainer.blocks import StatTap, adain
from gridtrainer.features import (FeatureExtractor, PretrainedWeightsError,
                                  TAP_CHANNELS)
from gridtrainer.model import TABLE, CoeffNet


class TestFeatureExtractor:
    def test_tap_shapes(self, extractor):
        torch.manual_seed(0)
        feats = extractor(torch.rand(1, 3, 256, 256))
        sizes = [256, 128, 64, 32]
        assert [tuple(f.shape) for f in feats] == \
            [(1, c, s, s) for c, s in zip(TAP_CHANNELS, sizes)]

    def test_deterministic(self, extractor):
        torch.manual_seed(1)
        img = torch.rand(1, 3, 256, 256)
        a = extractor(img)
        b = extractor(img)
        for x, y in zip(a, b):
            assert torch.equal(x, y)

    def test_zero_image_finite(self, extractor):
        for f in extractor(torch.zeros(1, 3, 256, 256)):
            assert torch.isfinite(f).all()

    def test_missing_weights_is_startup_error(self, monkeypatch):
        import torchvision

        def boom(*a, **k):
            raise OSError("no route to weights")

        monkeypatch.setattr(torchvision.models, "vgg19", boom)
        with pytest.raises(PretrainedWeightsError, match="unavailable"):
            FeatureExtractor()

    def test_untrained_mode_requires_seed(self):
        with pytest.raises(ValueError, match="seed"):
            FeatureExtractor(pretrained=False)

    def test_wrong_size_rejected(self, extractor):
        with pytest.raises(AssertionError, match="256x256"):
            extractor(torch.rand(1, 3, 128, 128))


class TestAdain:
    def test_fixed_point(self):
        torch.manual_seed(2)
        x = torch.rand(2, 5, 9, 7)
        assert float((adain(x, x) - x).abs().max()) < 1e-5

    def test_matches_style_statistics(self):
        torch.manual_seed(3)
        x, y = torch.rand(1, 4, 16, 16), 0.3 * torch.rand(1, 4, 16, 16) + 0.2
        out = adain(x, y)
        assert torch.allclose(out.mean(dim=(2, 3)), y.mean(dim=(2, 3)),
                              atol=1e-5)
        assert torch.allclose(out.var(dim=(2, 3), unbiased=False),
                              y.var(dim=(2, 3), unbiased=False), atol=1e-4)

    def test_spatial_permutation_of_style_is_invisible(self):
        # mu/sigma see the style map as a bag of pixels; only the
        # reduction order differs, so agreement is to rounding error
        torch.manual_seed(4)
        x, y = torch.rand(1, 3, 8, 8), torch.rand(1, 3, 8, 8)
        perm = torch.randperm(64)
        y_perm = y.flatten(2)[:, :, perm].view(1, 3, 8, 8)
        assert torch.allclose(adain(x, y), adain(x, y_perm),
                              atol=1e-6, rtol=0)


class TestCoeffNet:
    def test_output_shape_and_table(self, extractor):
        torch.manual_seed(5)
        net = CoeffNet()
        grid = net(extractor, torch.rand(2, 3, 256, 256),
                   torch.rand(2, 3, 256, 256))
        assert grid.shape == (2, 16, 16, 8, 3, 4)
        assert net.stage_shapes == TABLE

    def test_wrong_input_size_asserts(self, extractor):
        net = CoeffNet()
        with pytest.raises(AssertionError):
            net(extractor, torch.rand(1, 3, 128, 128),
                torch.rand(1, 3, 128, 128))

    def test_refresh_style_path_also_satisfies_table(self, extractor):
        torch.manual_seed(6)
        net = CoeffNet(style_path="refresh")
        grid = net(extractor, torch.rand(1, 3, 256, 256),
                   torch.rand(1, 3, 256, 256))
        assert grid.shape == (1, 16, 16, 8, 3, 4)
        assert net.stage_shapes == TABLE

    def test_identical_pair_runs_and_is_finite(self, extractor):
        torch.manual_seed(7)
        img = torch.rand(1, 3, 256, 256)
        grid = CoeffNet()(extractor, img, img.clone())
        assert torch.isfinite(grid).all()

    def test_untrained_net_predicts_near_identity(self, extractor):
        # fusion bias starts at the identity affine and weights at 1e-3
        torch.manual_seed(8)
        img = torch.rand(1, 3, 256, 256)
        with torch.no_grad():
            grid = CoeffNet()(extractor, img, torch.rand(1, 3, 256, 256))
        ident = torch.zeros(3, 4)
        ident[0, 0] = ident[1, 1] = ident[2, 2] = 1.0
        assert float((grid - ident).abs().max()) < 0.05

    def test_weight_sharing_single_conv_per_block(self):
        # the invariant is structural: one Conv2d serves both paths
        net = CoeffNet()
        for block in (net.s1, net.s2, net.s3):
            convs = [m for m in block.modules()
                     if isinstance(m, torch.nn.Conv2d)]
            assert len(convs) == 2  # shared stride-2 + selection

    def test_weight_sharing_survives_gradient_step(self, extractor):
        torch.manual_seed(9)
        net = CoeffNet()
        opt = torch.optim.Adam(net.parameters(), lr=1e-3)
        before = net.s1.shared.weight.detach().clone()
        grid = net(extractor, torch.rand(1, 3, 256, 256),
                   torch.rand(1, 3, 256, 256))
        grid.square().mean().backward()
        assert net.s1.shared.weight.grad is not None
        opt.step()
        after = net.s1.shared.weight
        assert not torch.equal(before, after)
        # both paths read the stepped parameter: it is the same object
        assert net.s1.shared.weight is after

    def test_style_enters_through_adain_statistics_only(self, extractor):
        # record every AdaIN's style moments, then replay them while
        # permuting the style features: if anything but those moments
        # reached the content path, the grid would move
        torch.manual_seed(10)
        net = CoeffNet()
        fc = extractor(torch.rand(1, 3, 256, 256))
        fs = extractor(torch.rand(1, 3, 256, 256))

        rec = StatTap("record")
        ref = net.forward_features(fc, fs, tap=rec)

        fs_perm = []
        for f in fs:
            n, c, h, w = f.shape
            perm = torch.randperm(h * w)
            fs_perm.append(f.flatten(2)[:, :, perm].view(n, c, h, w))
        rep = StatTap("replay")
        rep.stats = rec.stats
        out = net.forward_features(fc, fs_perm, tap=rep)
        assert torch.equal(ref, out)
