"""Fine-tuning a single-channel SR operator on eigenimages.

Each training cube is decomposed once with its own high-resolution
spectral basis.  Every epoch visits each cube once: one eigenimage channel
is drawn uniformly below the cube's energy cutoff, both resolutions are
projected onto that basis vector, an aligned random crop is taken, and the
L1 loss between the super-resolved and high-resolution crops drives Adam.

Adam at a fixed learning rate keeps the raw weights wandering at the end
of training, so the returned model is an exponential moving average of
the weights over optimizer steps (``ema_decay``, bias-corrected; 0
returns the raw weights).

Randomness for epoch ``e`` comes from ``default_rng([seed, e])`` so a run
resumed from a checkpoint replays exactly the epochs it skipped.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .cube import HsiCube, matrix_view
from .resample import downsample_cube
from .speclin import SpectralDecomposition, channel_cutoff, sample_channel, spectral_svd
from .srmodel import AdamState, TinyNet, adam_step, load_checkpoint, loss_and_grads, save_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    scale: int = 2
    tau: float = 0.97
    epochs: int = 200
    batch_size: int = 4
    learning_rate: float = 1e-3
    seed: int = 0
    patch_size: int = 24
    checkpoint_every: int = 50
    ema_decay: float = 0.99

    def __post_init__(self):
        if int(self.scale) != self.scale or self.scale < 2:
            raise ValueError(f"scale must be an integer >= 2, got {self.scale}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        for name in ("batch_size", "patch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.checkpoint_every < 0:
            raise ValueError(f"checkpoint_every must be >= 0, got {self.checkpoint_every}")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError(f"ema_decay must be in [0, 1), got {self.ema_decay}")

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**values)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")


@dataclass(frozen=True)
class TrainingTriplet:
    hr: HsiCube
    lr: HsiCube
    decomposition: SpectralDecomposition
    cutoff: int


class EigenPair(NamedTuple):
    lr: np.ndarray
    hr: np.ndarray
    channel: int


def build_triplets(cubes, scale: int, tau: float) -> list[TrainingTriplet]:
    """Degrade each cube, decompose the HR version and record its cutoff."""
    triplets = []
    for k, hr in enumerate(cubes):
        if hr.height % scale or hr.width % scale:
            raise ValueError(f"cube {k} of size {hr.height}x{hr.width} is not divisible by scale {scale}")
        dec = spectral_svd(matrix_view(hr))
        p = channel_cutoff(dec.singular_values, tau)
        triplets.append(TrainingTriplet(hr, downsample_cube(hr, scale), dec, p))
    return triplets


def sample_pair(triplet: TrainingTriplet, rng) -> EigenPair:
    """Project both resolutions onto one randomly chosen HR basis vector.

    ``channel`` is one-based and never exceeds the triplet's cutoff.
    """
    c = sample_channel(triplet.cutoff, rng)
    u = triplet.decomposition.basis[:, c - 1]
    return EigenPair(np.tensordot(u, triplet.lr.data, axes=1), np.tensordot(u, triplet.hr.data, axes=1), c)


def _crop(pair: EigenPair, size: int, scale: int, rng):
    h, w = pair.lr.shape
    if size > h or size > w:
        raise ValueError(f"patch size {size} exceeds low-resolution image size {h}x{w}")
    y, x = int(rng.integers(0, h - size + 1)), int(rng.integers(0, w - size + 1))
    lr = pair.lr[y : y + size, x : x + size]
    hr = pair.hr[y * scale : (y + size) * scale, x * scale : (x + size) * scale]
    return lr, hr


def train_epoch(model: TinyNet, triplets, cfg: TrainConfig, rng, optimizer: AdamState | None = None):
    """One pass over ``triplets``; returns ``(model, mean_loss, optimizer)``.

    ``model`` is updated in place.  The mean loss is over samples, using
    each batch's loss before its update.  With ``cfg.ema_decay > 0`` the
    weight average in ``optimizer.average`` is advanced after every step.
    """
    if getattr(model, "kind", None) != "tinynet":
        raise TypeError("only a tinynet model can be trained")
    if not triplets:
        raise ValueError("no training triplets")
    if optimizer is None:
        optimizer = AdamState.zeros(model.params)
    if cfg.ema_decay > 0 and optimizer.average is None:
        optimizer.average = {k: np.zeros_like(v) for k, v in model.params.items()}
    order = rng.permutation(len(triplets))
    crops = [_crop(sample_pair(triplets[k], rng), cfg.patch_size, cfg.scale, rng) for k in order]
    total = 0.0
    for start in range(0, len(crops), cfg.batch_size):
        batch = crops[start : start + cfg.batch_size]
        loss, grads = loss_and_grads(model, np.stack([b[0] for b in batch]), np.stack([b[1] for b in batch]))
        model.params, optimizer = adam_step(model.params, grads, optimizer, lr=cfg.learning_rate)
        if cfg.ema_decay > 0:
            for k, w in model.params.items():
                optimizer.average[k] += (1.0 - cfg.ema_decay) * (w - optimizer.average[k])
        total += loss * len(batch)
    return model, total / len(crops), optimizer


def averaged_weights(optimizer: AdamState, decay: float) -> dict:
    """Bias-corrected weight average after ``optimizer.t`` steps.

    The average starts at zero, so dividing by ``1 - decay**t`` makes it a
    normalized weighting of the iterates alone (the initial weights get no
    share), as with Adam's moment estimates.
    """
    correction = 1.0 - decay**optimizer.t
    return {k: v / correction for k, v in optimizer.average.items()}


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch])


class TrainResult(NamedTuple):
    model: TinyNet
    log: list


def finetune(model_init: TinyNet, cubes, cfg: TrainConfig, out_dir=None, resume=None) -> TrainResult:
    """Fine-tune ``model_init`` on eigenimages of ``cubes``.

    With ``out_dir`` set, a checkpoint (raw weights, Adam state, weight
    average, epoch) is written every ``cfg.checkpoint_every`` epochs and
    at the end, together with ``train_log.csv`` (``epoch,mean_loss,wall_time``)
    and ``model.esrw``, the returned (averaged) model.  ``resume`` names a
    checkpoint to continue from; the epochs already done are skipped.
    """
    if cfg.epochs == 0:
        return TrainResult(model_init, [])
    if model_init.scale != cfg.scale:
        raise ValueError(f"model scale {model_init.scale} does not match config scale {cfg.scale}")
    model, optimizer, first = model_init.copy(), None, 1
    if resume is not None:
        model, optimizer, meta = load_checkpoint(resume, cfg.scale)
        first = int(meta["epoch"]) + 1
    triplets = build_triplets(cubes, cfg.scale, cfg.tau)
    out = Path(out_dir) if out_dir is not None else None
    rows = []
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_file = open(out / "train_log.csv", "a" if resume is not None else "w", newline="")
        writer = csv.writer(log_file)
        if resume is None:
            writer.writerow(["epoch", "mean_loss", "wall_time"])
    t0 = time.perf_counter()
    try:
        for epoch in range(first, cfg.epochs + 1):
            model, loss, optimizer = train_epoch(model, triplets, cfg, epoch_rng(cfg.seed, epoch), optimizer)
            row = (epoch, loss, time.perf_counter() - t0)
            rows.append(row)
            log.debug("epoch %d loss %.6g", epoch, loss)
            if out is not None:
                writer.writerow([epoch, repr(loss), f"{row[2]:.3f}"])
                log_file.flush()
                if epoch == cfg.epochs or (cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0):
                    save_weights(model, out / f"checkpoint_{epoch:05d}.esrw", optimizer, {"epoch": epoch, "config": asdict(cfg)})
    finally:
        if out is not None:
            log_file.close()
    if optimizer is not None and optimizer.average is not None:
        model = TinyNet(model.scale, averaged_weights(optimizer, cfg.ema_decay), model.seed)
    if out is not None:
        save_weights(model, out / "model.esrw", meta={"epoch": cfg.epochs, "config": asdict(cfg)})
    return TrainResult(model, rows)
