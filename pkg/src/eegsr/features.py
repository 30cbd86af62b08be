"""Per-channel window statistics at 100 Hz.

Each frame holds five numbers per channel, channel-major, in the order
rms, zero-crossing rate, window mean, excess kurtosis, spectral entropy.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dsp import N_CHANNELS
from .errors import ArtifactError, DataError, ParameterError

FEATURE_NAMES = ("rms", "zcr", "mwa", "kurtosis", "pse")
N_FEATURES = len(FEATURE_NAMES)
RAW_DIM = N_CHANNELS * N_FEATURES
FRAME_RATE_HZ = 100.0
KURTOSIS_FLOOR = 1e-12

FEATURE_MAGIC = b"EEGF"
FEATURE_VERSION = 1


@dataclass(frozen=True)
class WindowConfig:
    window_len_samples: int = 100
    hop_samples: int = 10
    input_rate_hz: float = 1000.0

    def __post_init__(self):
        if self.window_len_samples < 2 or self.hop_samples < 1:
            raise ParameterError("window length must be >= 2 and hop >= 1")

    @property
    def output_rate_hz(self):
        return self.input_rate_hz / self.hop_samples


@dataclass
class FeatureSequence:
    frames: np.ndarray
    reduced: bool = False
    frame_rate_hz: float = FRAME_RATE_HZ
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] < 1:
            raise DataError(f"feature frames must be a non-empty 2-D matrix, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise DataError("feature frames contain non-finite values")
        self.frames = f

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]


def feature_index(channel, feature):
    """1-based (channel, feature) to 1-based feature dimension."""
    return N_FEATURES * (channel - 1) + feature


def feature_location(dim):
    """Inverse of :func:`feature_index`."""
    return (dim - 1) // N_FEATURES + 1, (dim - 1) % N_FEATURES + 1


def _check(window, min_len):
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1 or w.size < min_len:
        raise ParameterError(f"window needs at least {min_len} samples")
    return w


def rms(window):
    w = _check(window, 1)
    return float(np.sqrt(np.mean(w * w)))


def zero_crossing_rate(window):
    w = _check(window, 2)
    return float(_zcr(w[None, :])[0])


def moving_window_average(window):
    return float(np.mean(_check(window, 1)))


def kurtosis(window):
    w = _check(window, 2)
    return float(_kurtosis(w[None, :])[0])


def power_spectral_entropy(window):
    w = _check(window, 1)
    return float(_pse(w[None, :])[0])


# Batched forms operate on the last axis of an (..., W) array.


def _zcr(w):
    s = np.sign(w)
    crossings = (s[..., 1:] * s[..., :-1]) < 0
    return crossings.sum(axis=-1) / (w.shape[-1] - 1)


def _kurtosis(w):
    d = w - w.mean(axis=-1, keepdims=True)
    d2 = d * d
    m2 = d2.mean(axis=-1)
    m4 = (d2 * d2).mean(axis=-1)
    peak = np.abs(w).max(axis=-1)
    degenerate = m2 <= KURTOSIS_FLOOR * peak * peak
    with np.errstate(divide="ignore", invalid="ignore"):
        k = m4 / (m2 * m2) - 3.0
    return np.where(degenerate, 0.0, k)


def _pse(w):
    spec = np.abs(np.fft.rfft(w, axis=-1)) ** 2
    total = spec.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, spec / total, 0.0)
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return terms.sum(axis=-1)


def frame_count(n_samples, hop):
    return -(-n_samples // hop)


def window_stack(x, cfg):
    """(channels, N) -> (channels, T, W) causal windows, left zero-padded."""
    W, hop = cfg.window_len_samples, cfg.hop_samples
    n = x.shape[-1]
    padded = np.concatenate([np.zeros(x.shape[:-1] + (W - 1,)), x], axis=-1)
    # frame t ends at sample t*hop, i.e. padded index t*hop + W - 1
    return sliding_window_view(padded, W, axis=-1)[..., ::hop, :][..., : frame_count(n, hop), :]


def extract_features(rec, cfg=None):
    """Feature stream of a (preprocessed) recording, shape (T, 155)."""
    cfg = cfg or WindowConfig()
    x = np.asarray(rec.channels, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != N_CHANNELS:
        raise DataError(f"expected {N_CHANNELS} channels, got shape {x.shape}")
    w = window_stack(x, cfg)
    feats = np.stack(
        [
            np.sqrt(np.mean(w * w, axis=-1)),
            _zcr(w),
            w.mean(axis=-1),
            _kurtosis(w),
            _pse(w),
        ],
        axis=-1,
    )  # (channels, T, 5)
    frames = feats.transpose(1, 0, 2).reshape(feats.shape[1], RAW_DIM)
    meta = {
        "subject_id": rec.subject_id,
        "session_id": rec.session_id,
        "sentence_id": rec.sentence_id,
        "transcript": rec.transcript,
        "window_len_samples": cfg.window_len_samples,
        "hop_samples": cfg.hop_samples,
    }
    return FeatureSequence(frames, reduced=False, frame_rate_hz=cfg.output_rate_hz, meta=meta)


def save_features(seq, path):
    frames = np.ascontiguousarray(seq.frames, dtype="<f4")
    meta = dict(seq.meta, reduced=seq.reduced, frame_rate_hz=seq.frame_rate_hz)
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", FEATURE_VERSION, *frames.shape))
        fh.write(frames.tobytes())
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


def load_features(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ArtifactError(f"cannot read feature file {path}: {exc}") from exc
    if data[:4] != FEATURE_MAGIC:
        raise ArtifactError(f"{path}: not a feature file (bad magic)")
    version, T, D = struct.unpack_from("<III", data, 4)
    if version != FEATURE_VERSION:
        raise ArtifactError(f"{path}: feature format version {version}, expected {FEATURE_VERSION}")
    off = 16
    frames = np.frombuffer(data, dtype="<f4", count=T * D, offset=off).reshape(T, D)
    off += 4 * T * D
    (n,) = struct.unpack_from("<I", data, off)
    meta = json.loads(data[off + 4 : off + 4 + n].decode("utf-8"))
    reduced = bool(meta.pop("reduced", False))
    rate = float(meta.pop("frame_rate_hz", FRAME_RATE_HZ))
    return FeatureSequence(frames.astype(np.float64), reduced=reduced, frame_rate_hz=rate, meta=meta)
