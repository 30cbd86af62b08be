"""Manifests, recording files, train/test split and the synthetic EEG corpus."""

import csv
import json
import os
import re
import zlib
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

from .alphabet import SYMBOLS
from .dsp import N_CHANNELS, RAW_RATE_HZ, EegRecording
from .errors import DataError, ParameterError

MANIFEST_FIELDS = ("path", "transcript", "subject", "session", "sentence_id")
MAX_SENTENCE_ID = 30
SESSIONS = (1, 2, 3)
_KEEP = re.compile(r"[^a-z' ]+")


def normalize_transcript(text):
    """Lowercase, keep a-z / space / apostrophe, single-space, trim."""
    t = text.lower()
    t = re.sub(r"\s+", " ", t)
    t = _KEEP.sub("", t)
    t = re.sub(r" +", " ", t).strip()
    if not t:
        raise DataError(f"transcript {text!r} has no characters left after normalization")
    return t


def default_sentences():
    text = resources.files("eegsr").joinpath("sentences.txt").read_text(encoding="utf-8")
    return [normalize_transcript(line) for line in text.splitlines() if line.strip()]


def read_sentences(path):
    with open(path, encoding="utf-8") as fh:
        return [normalize_transcript(line) for line in fh if line.strip()]


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    transcript: str
    subject: int
    session: int
    sentence_id: int


@dataclass
class Manifest:
    entries: list
    root: str = "."

    def __len__(self):
        return len(self.entries)

    def resolve(self, entry):
        return entry.path if os.path.isabs(entry.path) else os.path.join(self.root, entry.path)


def _validate_entries(entries, where):
    bound = {}
    for i, e in enumerate(entries):
        if not 1 <= e.sentence_id <= MAX_SENTENCE_ID:
            raise DataError(f"{where} row {i + 1}: sentence_id {e.sentence_id} outside 1..{MAX_SENTENCE_ID}")
        if e.session not in SESSIONS:
            raise DataError(f"{where} row {i + 1}: session {e.session} not in {SESSIONS}")
        prev = bound.setdefault(e.sentence_id, e.transcript)
        if prev != e.transcript:
            raise DataError(
                f"{where} row {i + 1}: sentence {e.sentence_id} bound to {e.transcript!r} and {prev!r}"
            )


def load_manifest(path, check_files=True):
    root = os.path.dirname(os.path.abspath(path))
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open manifest {path}: {exc}") from exc
    entries = []
    with fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MANIFEST_FIELDS:
            raise DataError(f"{path}: header must be {','.join(MANIFEST_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                entry = ManifestEntry(
                    path=row["path"],
                    transcript=normalize_transcript(row["transcript"]),
                    subject=int(row["subject"]),
                    session=int(row["session"]),
                    sentence_id=int(row["sentence_id"]),
                )
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from exc
            entries.append(entry)
    manifest = Manifest(entries, root)
    _validate_entries(entries, path)
    if check_files:
        for i, e in enumerate(entries):
            if not os.path.exists(manifest.resolve(e)):
                raise DataError(f"{path} row {i + 1}: recording file {e.path} does not exist")
    return manifest


def write_manifest(manifest, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_FIELDS)
        for e in manifest.entries:
            w.writerow([e.path, e.transcript, e.subject, e.session, e.sentence_id])


def write_recording(rec, path):
    """Header line then one CSV row of 31 values per sample."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"channels={N_CHANNELS},fs={int(rec.sample_rate_hz)},sentence_id={rec.sentence_id}\n")
        np.savetxt(fh, rec.channels.T, fmt="%.9g", delimiter=",")


def read_recording(path):
    """Parse a recording file; returns ``(channels (31, N), header dict)``."""
    try:
        with open(path, encoding="ascii") as fh:
            header = fh.readline().strip()
            try:
                meta = dict(kv.split("=", 1) for kv in header.split(","))
                n_ch, fs = int(meta["channels"]), float(meta["fs"])
            except (ValueError, KeyError) as exc:
                raise DataError(f"{path}:1: malformed header {header!r}") from exc
            if n_ch != N_CHANNELS:
                raise DataError(f"{path}: header declares {n_ch} channels, expected {N_CHANNELS}")
            try:
                x = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}: malformed sample row ({exc})") from exc
    except OSError as exc:
        raise DataError(f"cannot read recording {path}: {exc}") from exc
    if x.shape[0] == 0:
        raise DataError(f"{path}: no samples")
    if x.shape[1] != N_CHANNELS:
        raise DataError(f"{path}: rows have {x.shape[1]} columns, expected {N_CHANNELS} channels")
    meta["fs"] = fs
    return x.T.copy(), meta


def load_recording(entry, manifest=None):
    path = manifest.resolve(entry) if manifest is not None else entry.path
    x, meta = read_recording(path)
    bad = np.argwhere(~np.isfinite(x))
    if bad.size:
        ch, idx = bad[0]
        raise DataError(f"{path}: non-finite sample in channel {ch}, index {idx}")
    return EegRecording(
        channels=x,
        transcript=entry.transcript,
        subject_id=str(entry.subject),
        session_id=entry.session,
        sentence_id=entry.sentence_id,
        sample_rate_hz=meta["fs"],
    )


def split_train_test(entries, ratio=0.8, seed=0):
    """Seeded shuffle; the first floor(ratio * n) go to train."""
    entries = list(entries)
    n = len(entries)
    if n < 2:
        raise ParameterError("need at least two entries to split")
    if not 0.0 < ratio < 1.0:
        raise ParameterError("ratio must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(n)
    k = int(np.floor(ratio * n))
    return [entries[i] for i in order[:k]], [entries[i] for i in order[k:]]


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 4
    sessions_per_subject: int = 3
    sentences: tuple = ()
    char_ms: float = 150.0
    jitter: float = 0.2
    signal_rms: float = 10.0
    noise_std: float = 5.0
    n_tones: int = 3
    f_lo: float = 4.0
    f_hi: float = 40.0
    sample_rate_hz: float = RAW_RATE_HZ
    seed: int = 0

    def __post_init__(self):
        if not self.sentences:
            object.__setattr__(self, "sentences", tuple(default_sentences()))
        if self.n_subjects < 1 or self.sessions_per_subject < 1:
            raise ParameterError("need at least one subject and one session")
        if self.sessions_per_subject > len(SESSIONS):
            raise ParameterError(f"at most {len(SESSIONS)} sessions per subject")
        if len(self.sentences) > MAX_SENTENCE_ID:
            raise ParameterError(f"at most {MAX_SENTENCE_ID} sentences")
        if self.char_ms <= 0 or not 0 <= self.jitter < 1:
            raise ParameterError("character duration must be positive and jitter in [0, 1)")
        if self.noise_std < 0 or self.signal_rms < 0:
            raise ParameterError("amplitudes must be non-negative")
        if any(not s for s in self.sentences):
            raise ParameterError("sentences must be non-empty")

    def to_dict(self):
        return asdict(self)


def _stable_rng(*key):
    return np.random.default_rng(zlib.crc32(repr(key).encode("utf-8")))


def char_signature(ch, cfg):
    """Tone frequencies (n_tones,), amplitudes and phases (31, n_tones) for one symbol.

    Channel powers average to ``signal_rms ** 2`` over the 31 channels.
    """
    rng = _stable_rng("freq", ch, cfg.n_tones, cfg.f_lo, cfg.f_hi)
    freqs = rng.uniform(cfg.f_lo, cfg.f_hi, size=cfg.n_tones)
    weights = rng.uniform(0.2, 1.8, size=N_CHANNELS)
    weights *= N_CHANNELS / weights.sum()
    amps = np.empty((N_CHANNELS, cfg.n_tones))
    phases = np.empty((N_CHANNELS, cfg.n_tones))
    for c in range(N_CHANNELS):
        r = _stable_rng("chan", ch, c)
        mix = r.uniform(0.5, 1.5, size=cfg.n_tones)
        mix /= np.sqrt(np.sum(mix**2) / 2.0)  # unit power
        amps[c] = cfg.signal_rms * np.sqrt(weights[c]) * mix
        phases[c] = r.uniform(0, 2 * np.pi, size=cfg.n_tones)
    return freqs, amps, phases


def subject_gain(subject, cfg):
    return float(_stable_rng("gain", subject, cfg.seed).uniform(0.8, 1.25))


def synth_recording(text, subject, session, sentence_id, cfg, noise=True):
    """One synthetic utterance; ``meta['durations']`` lists per-symbol sample counts."""
    rng = np.random.default_rng([cfg.seed, subject, session, sentence_id])
    fs = cfg.sample_rate_hz
    base = cfg.char_ms * fs / 1000.0
    durations = [
        max(1, int(round(base * (1.0 + cfg.jitter * rng.uniform(-1, 1))))) for _ in text
    ]
    gain = subject_gain(subject, cfg)
    segments = []
    for ch, n in zip(text, durations):
        freqs, amps, phases = char_signature(ch, cfg)
        t = np.arange(n) / fs
        arg = 2 * np.pi * freqs[None, :, None] * t[None, None, :] + phases[:, :, None]
        segments.append(gain * np.einsum("ct,ctn->cn", amps, np.sin(arg)))
    clean = np.concatenate(segments, axis=1)
    x = clean + rng.normal(0.0, cfg.noise_std, size=clean.shape) if noise else clean
    return EegRecording(
        channels=x,
        transcript=text,
        subject_id=str(subject),
        session_id=session,
        sentence_id=sentence_id,
        sample_rate_hz=fs,
        meta={"durations": durations, "gain": gain},
    )


def synth_generate(cfg=None):
    """Full factorial corpus: subjects x sessions x sentences.

    Returns ``(recordings, manifest)``; manifest paths are the file names
    :func:`write_corpus` will use.
    """
    cfg = cfg or SynthConfig()
    for s in cfg.sentences:
        bad = [c for c in s if c not in SYMBOLS]
        if bad:
            raise ParameterError(f"sentence {s!r} has characters outside the alphabet")
    recs, entries = [], []
    for subject in range(1, cfg.n_subjects + 1):
        for session in SESSIONS[: cfg.sessions_per_subject]:
            for sid, text in enumerate(cfg.sentences, start=1):
                recs.append(synth_recording(text, subject, session, sid, cfg))
                entries.append(
                    ManifestEntry(recording_name(subject, session, sid), text, subject, session, sid)
                )
    return recs, Manifest(entries)


def recording_name(subject, session, sentence_id):
    return f"s{subject:02d}_sess{session}_sent{sentence_id:02d}.csv"


def write_corpus(recs, manifest, out_dir, cfg=None):
    os.makedirs(out_dir, exist_ok=True)
    for rec, e in zip(recs, manifest.entries):
        write_recording(rec, os.path.join(out_dir, e.path))
    write_manifest(manifest, os.path.join(out_dir, "manifest.csv"))
    if cfg is not None:
        with open(os.path.join(out_dir, "synth_config.json"), "w") as fh:
            json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
