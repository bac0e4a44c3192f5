"""The coefficient-prediction network.

Input is a 256x256 content/style pair; output is a 16x16 grid of 8 luma
bins, each holding a 3x4 affine color transform. Three splatting blocks
digest the VGG taps down to 32x32, two more stride/plain convs reach
the 16x16 grid resolution, and the net then forks: a two-conv local
path keeps spatial structure, a global path (two stride-2 convs, four
fully-connected layers) condenses the scene into a 64-vector summary
that is broadcast back onto every cell before a 1x1 fusion conv emits
the 96 coefficient channels. ReLU follows every layer except that final
fusion; all convs are 3x3 zero-padded except the 1x1 fusion.

Every stage's shape for a 256 input is hard-asserted against the layout
table below; the network is intentionally not size-polymorphic (the
fully-connected summary pins the input size).

The fusion conv starts at the identity transform (small weights, bias
set so every luma bin holds the identity affine), so an untrained net
renders approximately its input. Training therefore walks away from a
photographic passthrough instead of from black frames.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import SplattingBlock

# stage -> (spatial, channels) for a 256x256 input
TABLE = {
    "S1_1": (128, 8), "S1_2": (128, 8),
    "S2_1": (64, 16), "S2_2": (64, 16),
    "S3_1": (32, 32), "S3_2": (32, 32),
    "C7": (16, 64), "C8": (16, 64),
    "L1": (16, 64), "L2": (16, 64),
    "G1": (8, 64), "G2": (4, 64),
    "G3": (1, 256), "G4": (1, 128), "G5": (1, 64), "G6": (1, 64),
    "F": (16, 96),
}

GRID_H = 16
GRID_W = 16
GRID_D = 8


class CoeffNet(nn.Module):
    def __init__(self, style_path: str = "cascade"):
        super().__init__()
        if style_path not in ("cascade", "refresh"):
            raise ValueError("style_path must be 'cascade' or 'refresh'")
        self.style_path = style_path
        self.s1 = SplattingBlock(64, 8, 128)
        self.s2 = SplattingBlock(8, 16, 256)
        self.s3 = SplattingBlock(16, 32, 512)
        self.c7 = nn.Conv2d(32, 64, 3, stride=2, padding=1)
        self.c8 = nn.Conv2d(64, 64, 3, padding=1)
        self.l1 = nn.Conv2d(64, 64, 3, padding=1)
        self.l2 = nn.Conv2d(64, 64, 3, padding=1)
        self.g1 = nn.Conv2d(64, 64, 3, stride=2, padding=1)
        self.g2 = nn.Conv2d(64, 64, 3, stride=2, padding=1)
        self.g3 = nn.Linear(64 * 4 * 4, 256)
        self.g4 = nn.Linear(256, 128)
        self.g5 = nn.Linear(128, 64)
        self.g6 = nn.Linear(64, 64)
        self.fuse = nn.Conv2d(64 + 64, 96, 1)
        self._init_identity_fusion()
        self.stage_shapes = {}

    def _init_identity_fusion(self):
        nn.init.normal_(self.fuse.weight, std=1e-3)
        bias = torch.zeros(96)
        # channel ((z*3 + i)*4 + j) is row i, col j of luma bin z
        for z in range(GRID_D):
            for i in range(3):
                bias[(z * 3 + i) * 4 + i] = 1.0
        with torch.no_grad():
            self.fuse.bias.copy_(bias)

    def _stage(self, name, x):
        n, c, h, w = x.shape
        assert (h, c) == TABLE[name] and w == h, \
            f"{name}: got {(h, c)}, table says {TABLE[name]}"
        self.stage_shapes[name] = (h, c)
        return x

    def forward_features(self, fc: list, fs: list, tap=None) -> torch.Tensor:
        """fc/fs: the four extractor taps for content and style.
        Returns grid coefficients (N, 16, 16, 8, 3, 4)."""
        refresh = self.style_path == "refresh"
        self.stage_shapes = {}

        x, y = fc[0], fs[0]
        for name, block, j in (("S1", self.s1, 1),
                               ("S2", self.s2, 2),
                               ("S3", self.s3, 3)):
            x, y = block(x, y, fc[j], fs[j], refresh_style=refresh, tap=tap)
            for sub, got in (("_1", block.shape_after_shared),
                             ("_2", block.shape_after_select)):
                assert got == TABLE[name + sub], (name + sub, got)
                self.stage_shapes[name + sub] = got

        x = self._stage("C7", F.relu(self.c7(x)))
        x = self._stage("C8", F.relu(self.c8(x)))

        loc = self._stage("L1", F.relu(self.l1(x)))
        loc = self._stage("L2", F.relu(self.l2(loc)))

        g = self._stage("G1", F.relu(self.g1(x)))
        g = self._stage("G2", F.relu(self.g2(g)))
        g = g.flatten(1)
        for name, fcl in (("G3", self.g3), ("G4", self.g4),
                          ("G5", self.g5), ("G6", self.g6)):
            g = F.relu(fcl(g))
            self.stage_shapes[name] = (1, g.shape[1])
            assert (1, g.shape[1]) == TABLE[name], name

        summary = g[:, :, None, None].expand(-1, -1, GRID_H, GRID_W)
        fused = self.fuse(torch.cat([loc, summary], 1))  # no relu
        self._stage("F", fused)

        n = fused.shape[0]
        grid = fused.view(n, GRID_D, 3, 4, GRID_H, GRID_W)
        return grid.permute(0, 4, 5, 1, 2, 3).contiguous()

    def forward(self, extractor, content: torch.Tensor,
                style: torch.Tensor) -> torch.Tensor:
        """content/style: (N, 3, 256, 256) in [0, 1]."""
        return self.forward_features(extractor(content), extractor(style))
