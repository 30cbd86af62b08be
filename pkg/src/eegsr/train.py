"""Adam, minibatch CTC training and checkpoint files."""

import json
import logging
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import alphabet, net
from .ctc import ctc_loss, min_frames
from .errors import ArtifactError, ParameterError, TrainingError

log = logging.getLogger(__name__)

CKPT_MAGIC = b"EEGC"
CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 130
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dropout: float = 0.1
    clip_norm: float = 5.0
    bucket_batches: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ParameterError("epochs, batch_size and lr must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError("dropout must be in [0, 1)")


class AdamState:
    def __init__(self, params):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {name}")
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def clip_global_norm(grads, max_norm):
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def batch_loss_and_grads(params, batch, masks=(None, None)):
    """Summed CTC loss over a batch of (frames, label) and its gradients.

    Sequences are right-padded to the longest; since every layer is causal,
    padding never reaches the frames that are scored.
    """
    lengths = [f.shape[0] for f, _ in batch]
    T, B = max(lengths), len(batch)
    D = batch[0][0].shape[1]
    x = np.zeros((T, B, D))
    for i, (f, _) in enumerate(batch):
        x[: lengths[i], i] = f
    logp, cache = net.forward(params, x, masks)
    dlogits = np.zeros_like(logp)
    losses = []
    for i, (_, label) in enumerate(batch):
        loss, g = ctc_loss(logp[: lengths[i], i], label)
        losses.append(loss)
        dlogits[: lengths[i], i] = g
    return losses, dlogits, cache


def _make_batches(lengths, cfg, rng):
    order = rng.permutation(len(lengths))
    span = cfg.batch_size * max(1, cfg.bucket_batches)
    batches = []
    for start in range(0, len(order), span):
        chunk = sorted(order[start : start + span], key=lambda i: (lengths[i], i))
        batches.extend(chunk[j : j + cfg.batch_size] for j in range(0, len(chunk), cfg.batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]


def train(dataset, cfg=None, model_cfg=None, params=None, progress=None):
    """Fit the model on ``[(frames (T, D), transcript), ...]``.

    Returns ``(params, loss_curve)`` with one mean CTC loss per epoch.
    """
    cfg = cfg or TrainConfig()
    items = []
    for i, (frames, text) in enumerate(dataset):
        frames = np.asarray(getattr(frames, "frames", frames), dtype=np.float64)
        label = alphabet.encode(text)
        if frames.shape[0] < min_frames(label):
            log.warning("skipping example %d: %d frames cannot emit %d-symbol label", i, frames.shape[0], len(label))
            continue
        items.append((frames, label))
    if not items:
        raise TrainingError("no trainable examples")
    if model_cfg is None:
        model_cfg = net.ModelConfig(input_dim=items[0][0].shape[1], dropout=cfg.dropout)
    if params is None:
        params = net.init_params(model_cfg, seed=cfg.seed)
    net.check_params(params, model_cfg)

    rng = np.random.default_rng(cfg.seed + 1)
    state = AdamState(params)
    lengths = [f.shape[0] for f, _ in items]
    curve = []
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for idx in _make_batches(lengths, cfg, rng):
            batch = [items[i] for i in idx]
            T = max(lengths[i] for i in idx)
            shapes = [(T, len(idx), model_cfg.hidden1), (T, len(idx), model_cfg.hidden2)]
            masks = net.dropout_masks(rng, shapes, model_cfg.dropout)
            losses, dlogits, cache = batch_loss_and_grads(params, batch, masks)
            grads = net.backward(params, cache, dlogits / len(batch))
            norm = clip_global_norm(grads, cfg.clip_norm)
            if norm > cfg.clip_norm:
                log.debug("epoch %d: clipped gradient norm %.3f", epoch + 1, norm)
            adam_step(params, grads, state, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            total += sum(losses)
            count += len(losses)
        mean = total / count
        if not np.isfinite(mean):
            raise TrainingError(f"epoch {epoch + 1}: loss is not finite")
        curve.append(mean)
        if progress:
            progress(epoch + 1, mean)
    return params, curve


def save_checkpoint(path, params, model_cfg, train_cfg=None, extra=None):
    header = {
        "alphabet": alphabet.SYMBOLS,
        "blank": alphabet.BLANK,
        "model": model_cfg.to_dict(),
        "train": asdict(train_cfg) if train_cfg else None,
    }
    if extra:
        header.update(extra)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<II", CKPT_VERSION, len(params)))
        for name in sorted(params):
            arr = np.ascontiguousarray(params[name], dtype="<f8")
            key = name.encode("utf-8")
            fh.write(struct.pack("<I", len(key)) + key)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


def load_checkpoint(path):
    """Returns ``(params, model_cfg, header)``."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ArtifactError(f"cannot read checkpoint {path}: {exc}") from exc
    if data[:4] != CKPT_MAGIC:
        raise ArtifactError(f"{path}: not a model checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", data, 4)
    if version != CKPT_VERSION:
        raise ArtifactError(f"{path}: checkpoint version {version}, expected {CKPT_VERSION}")
    off = 12
    params = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, off)
        name = data[off + 4 : off + 4 + n].decode("utf-8")
        off += 4 + n
        (rank,) = struct.unpack_from("<I", data, off)
        shape = struct.unpack_from(f"<{rank}I", data, off + 4)
        off += 4 + 4 * rank
        size = int(np.prod(shape)) if rank else 1
        params[name] = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
    (n,) = struct.unpack_from("<I", data, off)
    header = json.loads(data[off + 4 : off + 4 + n].decode("utf-8"))
    if header.get("alphabet") != alphabet.SYMBOLS:
        raise ArtifactError(f"{path}: checkpoint alphabet differs from this build")
    model_cfg = net.ModelConfig(**header["model"])
    net.check_params(params, model_cfg)
    return params, model_cfg, header


def write_loss_curve(path, curve):
    with open(path, "w") as fh:
        fh.write("epoch,mean_loss\n")
        for i, v in enumerate(curve, 1):
            fh.write(f"{i},{v:.10g}\n")
