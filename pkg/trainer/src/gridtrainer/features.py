"""VGG-19 feature taps.

Both images are encoded at four scales: the post-ReLU activations of
conv1_1, conv2_1, conv3_1 and conv4_1, so for a 256x256 input the maps
come out at 256/128/64/32 spatial with 64/128/256/512 channels. The
extractor is frozen; gradients flow through it to the input, which is
what lets the losses on the rendered output reach the grid.

Weights are the ImageNet-pretrained ones and their absence is a hard
startup error, not a silent fallback. For machines that cannot fetch
them there is an explicit untrained mode (seeded init): the taps are
then a fixed random multi-scale encoder, useless for actual styling
but sufficient to exercise the architecture, losses and training
mechanics deterministically.
"""

import torch
import torch.nn as nn
import torchvision

# indices into torchvision vgg19().features of the post-ReLU taps
_TAPS = (1, 6, 11, 20)
TAP_NAMES = ("conv1_1", "conv2_1", "conv3_1", "conv4_1")
TAP_CHANNELS = (64, 128, 256, 512)

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


class PretrainedWeightsError(RuntimeError):
    pass


class FeatureExtractor(nn.Module):
    def __init__(self, pretrained: bool = True, seed: int = None):
        super().__init__()
        if pretrained:
            try:
                vgg = torchvision.models.vgg19(
                    weights=torchvision.models.VGG19_Weights.IMAGENET1K_V1)
            except Exception as e:
                raise PretrainedWeightsError(
                    "pretrained VGG-19 weights unavailable "
                    f"({type(e).__name__}: {e}); download vgg19-dcbb9e9d.pth "
                    "into the torch hub cache, or construct with "
                    "pretrained=False and an explicit seed for the untrained "
                    "testing mode") from e
        else:
            if seed is None:
                raise ValueError("untrained mode requires an explicit seed")
            gen = torch.Generator().manual_seed(seed)
            vgg = torchvision.models.vgg19(weights=None)
            for m in vgg.features.modules():
                if isinstance(m, nn.Conv2d):
                    nn.init.kaiming_normal_(m.weight, generator=gen)
                    nn.init.zeros_(m.bias)
        self.layers = vgg.features[:_TAPS[-1] + 1]
        self.layers.eval()
        for p in self.layers.parameters():
            p.requires_grad_(False)
        self.register_buffer(
            "mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer(
            "std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))

    def train(self, mode: bool = True):
        # frozen encoder: ignore train() so dropout/bn semantics can
        # never drift (vgg19 features have neither, but be explicit)
        return super().train(False)

    def forward(self, img: torch.Tensor) -> list:
        """img: (N, 3, 256, 256) in [0, 1]. Returns the four tap maps."""
        assert img.dim() == 4 and img.shape[1] == 3, img.shape
        assert img.shape[2] == 256 and img.shape[3] == 256, \
            f"extractor is pinned to 256x256 inputs, got {tuple(img.shape)}"
        x = (img - self.mean) / self.std
        out = []
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i in _TAPS:
                out.append(x)
        return out
