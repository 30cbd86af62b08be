"""IIR filtering of raw EEG: Butterworth band-pass, power-line notch."""

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import DataError, ParameterError

N_CHANNELS = 31
RAW_RATE_HZ = 1000.0


@dataclass(frozen=True)
class BiquadCascade:
    """Second-order sections, one row ``(b0, b1, b2, 1, a1, a2)`` each."""

    sections: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        sos = np.atleast_2d(np.asarray(self.sections, dtype=np.float64))
        if sos.ndim != 2 or sos.shape[1] != 6 or sos.shape[0] == 0:
            raise ParameterError("sections must be a non-empty (n, 6) array")
        if not np.allclose(sos[:, 3], 1.0):
            raise ParameterError("denominators must be normalized (a0 = 1)")
        if self.sample_rate_hz <= 0:
            raise ParameterError("sample rate must be positive")
        sos.setflags(write=False)
        object.__setattr__(self, "sections", sos)

    def poles(self):
        return np.concatenate([np.roots(s[3:]) for s in self.sections])

    def is_stable(self):
        return bool(np.all(np.abs(self.poles()) < 1.0))


@dataclass
class EegRecording:
    channels: np.ndarray
    transcript: str = ""
    subject_id: str = ""
    session_id: int = 0
    sentence_id: int = 0
    sample_rate_hz: float = RAW_RATE_HZ
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.channels, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != N_CHANNELS:
            raise DataError(
                f"recording must have {N_CHANNELS} channels, got shape {x.shape}"
            )
        if x.shape[1] < 1:
            raise DataError("recording has no samples")
        self.channels = x

    @property
    def n_samples(self):
        return self.channels.shape[1]


def _bilinear_pole(s, fs):
    return (2.0 * fs + s) / (2.0 * fs - s)


def design_bandpass(lo_hz, hi_hz, fs_hz=RAW_RATE_HZ):
    """Fourth-order Butterworth band-pass (second-order prototype).

    The analog prototype is shifted to the pre-warped band and mapped to z
    by the bilinear transform. Each of the two sections carries one zero at
    z = 1 and one at z = -1.
    """
    if not (0 < lo_hz < hi_hz < fs_hz / 2):
        raise ParameterError(
            f"band edges must satisfy 0 < lo < hi < fs/2, got ({lo_hz}, {hi_hz}, {fs_hz})"
        )
    fs = float(fs_hz)
    w1 = 2 * fs * np.tan(np.pi * lo_hz / fs)
    w2 = 2 * fs * np.tan(np.pi * hi_hz / fs)
    bw = w2 - w1
    w0sq = w1 * w2

    # upper-half-plane pole of the 2nd-order Butterworth prototype
    p = np.exp(1j * 3 * np.pi / 4)
    disc = np.sqrt((p * bw) ** 2 - 4 * w0sq)
    analog = [(p * bw + disc) / 2, (p * bw - disc) / 2]

    # overall gain is fixed below: unity at the mapped band center
    sections = []
    for s in analog:
        z = _bilinear_pole(s, fs)
        sections.append([1.0, 0.0, -1.0, 1.0, -2.0 * z.real, abs(z) ** 2])
    sos = np.array(sections)
    fc = fs / np.pi * np.arctan(np.sqrt(w0sq) / (2 * fs))
    sos[:, :3] *= 1.0 / np.sqrt(_magnitude(sos, fc, fs))
    return BiquadCascade(sos, fs)


def design_notch(f0_hz, q=30.0, fs_hz=RAW_RATE_HZ):
    """Second-order notch with zeros on the unit circle at +-2*pi*f0/fs."""
    if not (0 < f0_hz < fs_hz / 2):
        raise ParameterError(f"notch frequency must be in (0, fs/2), got {f0_hz}")
    if q <= 0:
        raise ParameterError(f"Q must be positive, got {q}")
    w0 = 2 * np.pi * f0_hz / fs_hz
    g = 1.0 / (1.0 + np.tan(w0 / q / 2))
    c = np.cos(w0)
    sos = np.array([[g, -2 * g * c, g, 1.0, -2 * g * c, 2 * g - 1]])
    return BiquadCascade(sos, float(fs_hz))


def _section_response(sos, f_hz, fs):
    zi = np.exp(-1j * 2 * np.pi * f_hz / fs)
    num = sos[:, 0] + sos[:, 1] * zi + sos[:, 2] * zi**2
    den = sos[:, 3] + sos[:, 4] * zi + sos[:, 5] * zi**2
    return num / den


def _magnitude(sos, f_hz, fs):
    return float(np.abs(np.prod(_section_response(sos, f_hz, fs))))


def frequency_response(filt, f_hz):
    """Gain in dB at ``f_hz``; ``-inf`` at an exact transmission zero."""
    if not (0 <= f_hz <= filt.sample_rate_hz / 2):
        raise ParameterError(f"frequency {f_hz} outside [0, fs/2]")
    mag = _magnitude(filt.sections, f_hz, filt.sample_rate_hz)
    with np.errstate(divide="ignore"):
        return float(20 * np.log10(mag))


def section_responses_db(filt, f_hz):
    """Per-section gains in dB; their sum is ``frequency_response``."""
    h = _section_response(filt.sections, f_hz, filt.sample_rate_hz)
    with np.errstate(divide="ignore"):
        return 20 * np.log10(np.abs(h))


def filter_apply(filt, signal, backend=None):
    """Causal forward filtering with zero initial state.

    Accepts one signal or a (channels, samples) array; rows are independent.
    """
    x = np.asarray(signal, dtype=np.float64)
    one_d = x.ndim == 1
    x2 = np.atleast_2d(x)
    bad = ~np.isfinite(x2)
    if bad.any():
        row, idx = np.argwhere(bad)[0]
        where = f"index {idx}" if one_d else f"channel {row}, index {idx}"
        raise DataError(f"non-finite sample at {where}")
    y = kernels.sos_filter(filt.sections, x2, backend=backend)
    return y[0] if one_d else y


def preprocess_recording(rec, bandpass=None, notch=None, backend=None):
    """Band-pass then notch every channel; metadata is carried over."""
    fs = rec.sample_rate_hz
    bandpass = bandpass or design_bandpass(0.1, 70.0, fs)
    notch = notch or design_notch(60.0, 30.0, fs)
    # one cascade keeps the per-channel order bandpass -> notch
    chain = BiquadCascade(np.vstack([bandpass.sections, notch.sections]), fs)
    return replace(rec, channels=filter_apply(chain, rec.channels, backend=backend))
