"""Single-channel super-resolution operators.

Two operators map an ``h x w`` image to ``(h*scale) x (w*scale)``:

``BicubicSR``
    Plain bicubic interpolation; exactly linear, nothing to train.
``TinyNet``
    Per-image min-max normalization, bicubic pre-upsampling, then three
    edge-padded convolutions (9x9, 5x5, 5x5; widths 1-32-16-1, ReLU after
    the first two), then denormalization.  Forward and backward passes are
    written directly in numpy (im2col + matmul) so that training needs no
    deep-learning framework.

Checkpoints are ``b"ESRW1"`` + little-endian ``u32`` manifest length +
JSON manifest + a flat ``<f8`` blob whose SHA-256 is recorded in the
manifest.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .resample import bicubic_upsample

NORM_EPS = 1e-8
CHECKPOINT_MAGIC = b"ESRW1"
CHECKPOINT_VERSION = 1

KERNELS = (9, 5, 5)
WIDTHS = (1, 32, 16, 1)
PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


class CheckpointError(ValueError):
    pass


class ScaleMismatchError(ValueError):
    pass


# --------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class Normalization:
    """Affine map ``x -> (x - shift) / scale`` with ``scale >= NORM_EPS``."""

    shift: float
    scale: float
    degenerate: bool = False

    @classmethod
    def fit(cls, img) -> "Normalization":
        img = np.asarray(img)
        lo, hi = float(img.min()), float(img.max())
        spread = hi - lo
        return cls(shift=lo, scale=max(spread, NORM_EPS), degenerate=spread <= NORM_EPS)

    def apply(self, img):
        return (np.asarray(img, dtype=np.float64) - self.shift) / self.scale

    def invert(self, img):
        return np.asarray(img, dtype=np.float64) * self.scale + self.shift


# --------------------------------------------------------------------------
# operators


class BicubicSR:
    kind = "bicubic"

    def __init__(self, scale: int):
        self.scale = int(scale)

    def __call__(self, img):
        return bicubic_upsample(img, self.scale)

    def __repr__(self):
        return f"BicubicSR(scale={self.scale})"


def init_params(seed: int) -> dict[str, np.ndarray]:
    """Uniform ``+-sqrt(1/fan_in)`` initialization for weights and biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for i, k in enumerate(KERNELS):
        c_in, c_out = WIDTHS[i], WIDTHS[i + 1]
        bound = np.sqrt(1.0 / (c_in * k * k))
        params[f"w{i + 1}"] = rng.uniform(-bound, bound, size=(c_out, c_in, k, k))
        params[f"b{i + 1}"] = rng.uniform(-bound, bound, size=(c_out,))
    return params


def param_shapes() -> dict[str, tuple[int, ...]]:
    shapes = {}
    for i, k in enumerate(KERNELS):
        shapes[f"w{i + 1}"] = (WIDTHS[i + 1], WIDTHS[i], k, k)
        shapes[f"b{i + 1}"] = (WIDTHS[i + 1],)
    return shapes


class TinyNet:
    kind = "tinynet"

    def __init__(self, scale: int, params: dict | None = None, seed: int = 0):
        self.scale = int(scale)
        self.seed = int(seed)
        if params is None:
            params = init_params(seed)
        shapes = param_shapes()
        if set(params) != set(shapes):
            raise ValueError(f"expected parameters {sorted(shapes)}, got {sorted(params)}")
        self.params = {}
        for name, shape in shapes.items():
            value = np.array(params[name], dtype=np.float64)
            if value.shape != shape:
                raise ValueError(f"parameter {name} has shape {value.shape}, expected {shape}")
            self.params[name] = value

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "TinyNet":
        return TinyNet(self.scale, {k: v.copy() for k, v in self.params.items()}, self.seed)

    def __call__(self, img):
        return self.predict(img[None])[0]

    def predict(self, imgs) -> np.ndarray:
        """Super-resolve a batch ``(B, h, w)`` of independent images."""
        out, _ = forward(self, imgs)
        return out

    def __repr__(self):
        return f"TinyNet(scale={self.scale}, seed={self.seed}, n_params={self.n_params})"


def sr_apply(op, img) -> np.ndarray:
    """Apply a single-channel SR operator to one 2-D image."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return op(img)


# --------------------------------------------------------------------------
# convolution layers


def _im2col(x, k):
    """Edge-padded k x k patches of a (C, H, W) array as a (C*k*k, H*W) matrix."""
    C, H, W = x.shape
    r = k // 2
    xp = np.pad(x, ((0, 0), (r, r), (r, r)), mode="edge")
    cols = np.empty((C, k, k, H, W))
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, i : i + H, j : j + W]
    return cols.reshape(C * k * k, H * W)


def _col2im(dcols, shape, k):
    """Adjoint of :func:`_im2col`, including the edge replication."""
    C, H, W = shape
    r = k // 2
    d = dcols.reshape(C, k, k, H, W)
    gp = np.zeros((C, H + 2 * r, W + 2 * r))
    for i in range(k):
        for j in range(k):
            gp[:, i : i + H, j : j + W] += d[:, i, j]
    # fold the padding ring back onto the edge pixels it replicated
    rows = gp[:, r : r + H].copy()
    rows[:, 0] += gp[:, :r].sum(axis=1)
    rows[:, -1] += gp[:, r + H :].sum(axis=1)
    out = rows[:, :, r : r + W].copy()
    out[:, :, 0] += rows[:, :, :r].sum(axis=2)
    out[:, :, -1] += rows[:, :, r + W :].sum(axis=2)
    return out


def _conv(x, w, b):
    _, H, W = x.shape
    cols = _im2col(x, w.shape[-1])
    out = w.reshape(w.shape[0], -1) @ cols + b[:, None]
    return out.reshape(-1, H, W), cols


@dataclass
class _SampleCache:
    norm: Normalization
    cols: tuple
    pre: tuple


def _forward_one(p, x):
    h1, c1 = _conv(x[None], p["w1"], p["b1"])
    a1 = np.maximum(h1, 0.0)
    h2, c2 = _conv(a1, p["w2"], p["b2"])
    a2 = np.maximum(h2, 0.0)
    y, c3 = _conv(a2, p["w3"], p["b3"])
    return y[0], (c1, c2, c3), (h1, h2)


def forward(net: TinyNet, imgs):
    """Batch forward pass; returns ``(outputs, caches)`` with outputs in input units."""
    imgs = np.asarray(imgs, dtype=np.float64)
    if imgs.ndim != 3:
        raise ValueError(f"expected a (B, h, w) batch, got shape {imgs.shape}")
    norms = [Normalization.fit(im) for im in imgs]
    x = bicubic_upsample(np.stack([n.apply(im) for n, im in zip(norms, imgs)]), net.scale)
    out = np.empty_like(x)
    caches = []
    for i, n in enumerate(norms):
        if n.degenerate:
            # constant input: pass through without touching the network
            out[i] = x[i] * n.scale + n.shift
            caches.append(_SampleCache(n, (), ()))
            continue
        y, cols, pre = _forward_one(net.params, x[i])
        out[i] = n.invert(y)
        caches.append(_SampleCache(n, cols, pre))
    return out, caches


def backward_from_output(net: TinyNet, caches, grad_out) -> dict[str, np.ndarray]:
    """Parameter gradients given ``d loss / d output`` in input units."""
    p = net.params
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    grad_out = np.asarray(grad_out, dtype=np.float64)
    for cache, g in zip(caches, grad_out):
        if cache.norm.degenerate:
            continue
        c1, c2, c3 = cache.cols
        h1, h2 = cache.pre
        G3 = (g * cache.norm.scale).reshape(1, -1)
        grads["w3"] += (G3 @ c3.T).reshape(p["w3"].shape)
        grads["b3"] += G3.sum(axis=1)
        dh2 = _col2im(p["w3"].reshape(1, -1).T @ G3, h2.shape, KERNELS[2]) * (h2 > 0)
        G2 = dh2.reshape(dh2.shape[0], -1)
        grads["w2"] += (G2 @ c2.T).reshape(p["w2"].shape)
        grads["b2"] += G2.sum(axis=1)
        dh1 = _col2im(p["w2"].reshape(p["w2"].shape[0], -1).T @ G2, h1.shape, KERNELS[1]) * (h1 > 0)
        G1 = dh1.reshape(dh1.shape[0], -1)
        grads["w1"] += (G1 @ c1.T).reshape(p["w1"].shape)
        grads["b1"] += G1.sum(axis=1)
    return grads


# --------------------------------------------------------------------------
# loss and optimizer


def l1_loss(pred, target) -> float:
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean(np.abs(pred - target)))


def loss_and_grads(net: TinyNet, imgs, targets):
    """Mean L1 loss over a batch and its parameter gradients.

    The subgradient of ``|r|`` at ``r = 0`` is taken as 0.
    """
    out, cache = forward(net, imgs)
    targets = np.asarray(targets, dtype=np.float64)
    if out.shape != targets.shape:
        raise ValueError(f"prediction shape {out.shape} does not match target shape {targets.shape}")
    residual = out - targets
    loss = float(np.mean(np.abs(residual)))
    grads = backward_from_output(net, cache, np.sign(residual) / residual.size)
    return loss, grads


def backward(op, img, target) -> dict[str, np.ndarray]:
    """Gradients of ``l1_loss(sr_apply(op, img), target)`` w.r.t. every weight."""
    if getattr(op, "kind", None) != "tinynet":
        raise TypeError(f"{type(op).__name__} has no trainable parameters")
    img = np.asarray(img, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return loss_and_grads(op, img[None], target[None])[1]


@dataclass
class AdamState:
    """Adam moments and step count.

    ``average`` optionally holds an exponential moving average of the
    weights; :func:`adam_step` carries it through untouched and the
    training loop updates it.
    """

    t: int
    m: dict
    v: dict
    average: dict | None = None

    @classmethod
    def zeros(cls, params) -> "AdamState":
        return cls(0, {k: np.zeros_like(v) for k, v in params.items()}, {k: np.zeros_like(v) for k, v in params.items()})


def adam_step(weights, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update with bias correction; returns ``(new_weights, new_state)``."""
    if set(weights) != set(grads):
        raise ValueError("weights and gradients have different keys")
    t = state.t + 1
    new_w, new_m, new_v = {}, {}, {}
    for name, w in weights.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != w.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {w.shape}")
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new_w[name] = w - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    return new_w, AdamState(t, new_m, new_v, state.average)


# --------------------------------------------------------------------------
# checkpoints


def _arch_record(kind):
    if kind == "tinynet":
        return {"kind": "tinynet", "kernels": list(KERNELS), "widths": list(WIDTHS), "padding": "edge"}
    return {"kind": kind}


def save_weights(op, path, optimizer: AdamState | None = None, meta: dict | None = None) -> None:
    """Write a checkpoint; optional Adam state and JSON metadata ride along."""
    arrays = []
    if op.kind == "tinynet":
        arrays += [(name, op.params[name]) for name in PARAM_NAMES]
    if optimizer is not None:
        arrays += [(f"adam_m/{k}", optimizer.m[k]) for k in PARAM_NAMES]
        arrays += [(f"adam_v/{k}", optimizer.v[k]) for k in PARAM_NAMES]
        if optimizer.average is not None:
            arrays += [(f"ema/{k}", optimizer.average[k]) for k in PARAM_NAMES]
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "arch": _arch_record(op.kind),
        "scale": op.scale,
        "seed": getattr(op, "seed", None),
        "params": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        "adam_t": optimizer.t if optimizer is not None else None,
        "blob_bytes": len(blob),
        "sha256": hashlib.sha256(blob).hexdigest(),
        "meta": meta or {},
    }
    header = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(blob)


def load_checkpoint(path, scale: int | None = None):
    """Read a checkpoint; returns ``(op, optimizer_state_or_None, meta)``."""
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not a weight checkpoint (bad magic)")
    start = len(CHECKPOINT_MAGIC) + 4
    if len(raw) < start:
        raise CheckpointError(f"{path}: truncated checkpoint")
    (hlen,) = struct.unpack_from("<I", raw, len(CHECKPOINT_MAGIC))
    try:
        manifest = json.loads(raw[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: malformed manifest: {exc}") from None
    if manifest.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {manifest.get('format_version')!r}")
    blob = raw[start + hlen :]
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointError(f"{path}: blob length {len(blob)} does not match manifest ({manifest['blob_bytes']})")
    if hashlib.sha256(blob).hexdigest() != manifest["sha256"]:
        raise CheckpointError(f"{path}: checksum mismatch")
    kind = manifest["arch"].get("kind")
    if manifest["arch"] != _arch_record(kind) or kind not in ("tinynet", "bicubic"):
        raise CheckpointError(f"{path}: unsupported architecture {manifest['arch']}")
    if scale is not None and int(scale) != manifest["scale"]:
        raise ScaleMismatchError(f"checkpoint was trained for scale {manifest['scale']}, job requests scale {scale}")

    arrays, offset = {}, 0
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arrays[entry["name"]] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
    if kind == "bicubic":
        return BicubicSR(manifest["scale"]), None, manifest["meta"]
    shapes = param_shapes()
    for name in PARAM_NAMES:
        if name not in arrays or arrays[name].shape != shapes[name]:
            raise CheckpointError(f"{path}: parameter {name} missing or mis-shaped for the tinynet architecture")
    net = TinyNet(manifest["scale"], {k: arrays[k] for k in PARAM_NAMES}, manifest["seed"] or 0)
    opt = None
    if manifest["adam_t"] is not None:
        average = {k: arrays[f"ema/{k}"] for k in PARAM_NAMES} if f"ema/{PARAM_NAMES[0]}" in arrays else None
        opt = AdamState(
            manifest["adam_t"],
            {k: arrays[f"adam_m/{k}"] for k in PARAM_NAMES},
            {k: arrays[f"adam_v/{k}"] for k in PARAM_NAMES},
            average,
        )
    return net, opt, manifest["meta"]


def load_weights(path, scale: int | None = None):
    """Load only the operator from a checkpoint, optionally checking its scale."""
    return load_checkpoint(path, scale)[0]
