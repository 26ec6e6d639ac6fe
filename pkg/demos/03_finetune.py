"""Fine-tuning a small SR network on eigenimages.

Training pairs are built from eigenimages rather than raw bands: each
high-resolution cube is decomposed, one of its first p channels is
picked (p from a cumulative-energy threshold), and the pair is that
eigenimage together with the same projection of the downsampled cube.
The returned weights are a running average over optimizer steps, which
irons out the wander of fixed-rate Adam.  Fewer than ~100 epochs is
usually not enough to beat bicubic.

    python3 demos/03_finetune.py [epochs] [model.esrw]
"""

import sys

import numpy as np

from eigensr import BicubicSR, TinyNet, TrainConfig, eigensr_alpha, finetune, psnr, save_weights
from eigensr.synthetic import band_limited_cube
from eigensr.resample import downsample_cube

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 200
rng = np.random.default_rng(1000)
train = [band_limited_cube(31, 64, 64, rng=rng) for _ in range(20)]
test = [band_limited_cube(31, 64, 64, rng=rng) for _ in range(5)]


def held_out(model):
    return np.mean([psnr(eigensr_alpha(downsample_cube(c, 2), model, 16), c)[0] for c in test])


cfg = TrainConfig(scale=2, epochs=epochs, batch_size=4, patch_size=16, seed=0)
result = finetune(TinyNet(2, seed=0), train, cfg)
for epoch, loss, wall in result.log[:: max(1, epochs // 6)]:
    print(f"epoch {epoch:4d}  L1 {loss:.5f}  {wall:6.1f} s")

base = held_out(BicubicSR(2))
tuned = held_out(result.model)
print(f"held-out PSNR: bicubic {base:.2f} dB, fine-tuned {tuned:.2f} dB ({tuned - base:+.2f} dB)")

if len(sys.argv) > 2:
    save_weights(result.model, sys.argv[2])
    print("saved", sys.argv[2])
