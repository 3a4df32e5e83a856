#!/usr/bin/env python3
"""Export torchvision VGG-16 convolution weights for the style loss.

Writes an archive with buffers conv{i}_weight / conv{i}_bias for the first ten
convolutions (through conv4_3), readable by the C++ style extractor:

    python tools/export_vgg16_weights.py vgg16_features.pt
    crackres train --style-weights-path vgg16_features.pt ...

Needs torchvision and network access for the ImageNet weights.
"""

import argparse

import torch
import torchvision


class ConvArchive(torch.nn.Module):
    def __init__(self, convs):
        super().__init__()
        for i, conv in enumerate(convs):
            self.register_buffer(f"conv{i}_weight", conv.weight.detach().clone())
            self.register_buffer(f"conv{i}_bias", conv.bias.detach().clone())

    def forward(self, x):
        return x


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("output", help="destination .pt file")
    parser.add_argument("--untrained", action="store_true",
                        help="export randomly initialised weights (format check only, no download)")
    args = parser.parse_args()

    weights = None if args.untrained else torchvision.models.VGG16_Weights.IMAGENET1K_V1
    features = torchvision.models.vgg16(weights=weights).features
    convs = [m for m in features if isinstance(m, torch.nn.Conv2d)][:10]
    torch.jit.save(torch.jit.script(ConvArchive(convs)), args.output)
    print(f"wrote {len(convs)} convolutions to {args.output}")


if __name__ == "__main__":
    main()
