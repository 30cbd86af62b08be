"""Single JSON configuration for every pipeline stage."""

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ParameterError


@dataclass(frozen=True)
class FilterParams:
    band_lo_hz: float = 0.1
    band_hi_hz: float = 70.0
    notch_hz: float = 60.0
    notch_q: float = 30.0


@dataclass(frozen=True)
class WindowParams:
    window_len_samples: int = 100
    hop_samples: int = 10


@dataclass(frozen=True)
class KpcaParams:
    n_components: int = 20
    gamma: float = None  # None -> 1 / input dimension
    coef0: float = 1.0
    degree: int = 3
    pool_cap: int = 4000
    standardize: bool = True


@dataclass(frozen=True)
class TrainParams:
    epochs: int = 130
    batch_size: int = 32
    lr: float = 1e-3
    dropout: float = 0.1
    clip_norm: float = 5.0
    hidden1: int = 128
    hidden2: int = 64
    tcn_filters: int = 32
    tcn_kernel: int = 3


@dataclass(frozen=True)
class DecodeParams:
    beam_width: int = 25
    lm_weight: float = 0.5
    ins_bonus: float = 0.1
    nbest: int = 5
    lm_order: int = 4
    lm_discount: float = 0.75
    lm_corpus: str = None  # None -> training transcripts


@dataclass(frozen=True)
class SynthParams:
    enabled: bool = True
    n_subjects: int = 4
    sessions_per_subject: int = 3
    n_sentences: int = 30
    sentences_file: str = None
    char_ms: float = 150.0
    jitter: float = 0.2
    signal_rms: float = 10.0
    noise_std: float = 5.0


@dataclass(frozen=True)
class PipelineConfig:
    work_dir: str = "work"
    data_dir: str = None  # None -> <work_dir>/raw
    seed: int = 0
    split_ratio: float = 0.8
    synth: SynthParams = field(default_factory=SynthParams)
    filters: FilterParams = field(default_factory=FilterParams)
    window: WindowParams = field(default_factory=WindowParams)
    kpca: KpcaParams = field(default_factory=KpcaParams)
    train: TrainParams = field(default_factory=TrainParams)
    decode: DecodeParams = field(default_factory=DecodeParams)

    @property
    def raw_dir(self):
        return self.data_dir or f"{self.work_dir}/raw"

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_SECTIONS = {
    "synth": SynthParams,
    "filters": FilterParams,
    "window": WindowParams,
    "kpca": KpcaParams,
    "train": TrainParams,
    "decode": DecodeParams,
}


def _build(cls, raw, where):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown config keys in {where}: {sorted(unknown)}")
    return cls(**raw)


def from_dict(raw):
    raw = dict(raw)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in raw:
            kwargs[name] = _build(cls, raw.pop(name) or {}, name)
    top = _build(PipelineConfig, raw, "top level")
    return replace(top, **kwargs)


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    return from_dict(raw)


def override(cfg, section, **values):
    """Replace non-None ``values`` inside one section (or the top level)."""
    values = {k: v for k, v in values.items() if v is not None}
    if not values:
        return cfg
    if section is None:
        return replace(cfg, **values)
    return replace(cfg, **{section: replace(getattr(cfg, section), **values)})
