import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegsr import features
from eegsr.dsp import EegRecording
from eegsr.errors import DataError, ParameterError


# Straight-from-definition scalar oracles (plain Python loops).

def rms_oracle(w):
    return math.sqrt(sum(v * v for v in w) / len(w))


def zcr_oracle(w):
    def sgn(v):
        return int(v > 0) - int(v < 0)

    return sum(1 for a, b in zip(w, w[1:]) if sgn(a) * sgn(b) < 0) / (len(w) - 1)


def mean_oracle(w):
    return sum(w) / len(w)


def kurtosis_oracle(w):
    mu = sum(w) / len(w)
    m2 = sum((v - mu) ** 2 for v in w) / len(w)
    m4 = sum((v - mu) ** 4 for v in w) / len(w)
    peak = max(abs(v) for v in w)
    if m2 <= 1e-12 * peak * peak:
        return 0.0
    return m4 / (m2 * m2) - 3.0


def pse_oracle(w):
    L = len(w)
    power = []
    for k in range(L // 2 + 1):
        re = sum(v * math.cos(2 * math.pi * k * n / L) for n, v in enumerate(w))
        im = -sum(v * math.sin(2 * math.pi * k * n / L) for n, v in enumerate(w))
        power.append(re * re + im * im)
    total = sum(power)
    if total == 0:
        return 0.0
    return -sum(p / total * math.log(p / total) for p in power if p > 0)


ORACLES = {
    "rms": (features.rms, rms_oracle),
    "zcr": (features.zero_crossing_rate, zcr_oracle),
    "mwa": (features.moving_window_average, mean_oracle),
    "kurtosis": (features.kurtosis, kurtosis_oracle),
    "pse": (features.power_spectral_entropy, pse_oracle),
}


class TestScalarFeatures:
    def test_rms_examples(self):
        assert features.rms([0, 0, 0, 0]) == 0
        assert features.rms([-2.5] * 7) == pytest.approx(2.5)
        assert features.rms([3, 4]) == pytest.approx(3.5355339059327378, rel=1e-12)

    def test_zcr_examples(self):
        assert features.zero_crossing_rate([1, -1, 1, -1]) == 1.0
        assert features.zero_crossing_rate([2, 3, 4, 5]) == 0.0
        # pair (1, 0) and pair (0, -1) both touch zero: sign(0) = 0 never crosses
        assert features.zero_crossing_rate([1, 0, -1]) == 0.0

    def test_mwa_examples(self):
        assert features.moving_window_average([4.2] * 5) == pytest.approx(4.2)
        assert features.moving_window_average([1, 2, 3]) == 2.0
        assert features.moving_window_average([-1, 5]) == 2.0

    def test_kurtosis_examples(self):
        assert features.kurtosis([3, 3, 3, 3]) == 0.0
        assert features.kurtosis([1, -1, 1, -1]) == pytest.approx(-2.0, rel=1e-12)
        # m2 = 3/16, m4 = (3 * (1/4)**4 + (3/4)**4) / 4 = 21/256
        assert features.kurtosis([0, 0, 0, 1]) == pytest.approx(21 / 9 - 3, rel=1e-12)

    def test_pse_examples(self):
        assert features.power_spectral_entropy(np.zeros(16)) == 0.0
        assert features.power_spectral_entropy(np.full(16, 0.7)) == pytest.approx(0.0, abs=1e-12)
        n = np.arange(32)
        two_tones = np.cos(2 * np.pi * 3 * n / 32) + np.cos(2 * np.pi * 7 * n / 32)
        assert features.power_spectral_entropy(two_tones) == pytest.approx(math.log(2), rel=1e-9)

    def test_preconditions(self):
        for fn in (features.rms, features.moving_window_average, features.power_spectral_entropy):
            with pytest.raises(ParameterError):
                fn([])
        for fn in (features.zero_crossing_rate, features.kurtosis):
            with pytest.raises(ParameterError):
                fn([1.0])

    @pytest.mark.parametrize("name", sorted(ORACLES))
    def test_against_oracle_random_windows(self, name):
        fn, oracle = ORACLES[name]
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        for _ in range(200):
            L = int(rng.integers(2, 64))
            w = rng.normal(size=L) * rng.uniform(0.1, 50)
            if rng.random() < 0.1:
                w[rng.integers(L)] = 0.0
            got, want = fn(w), oracle(list(w))
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def _rec(x):
    return EegRecording(channels=x, transcript="a", subject_id="1", session_id=1, sentence_id=1)


class TestExtract:
    def test_zero_recording(self):
        seq = features.extract_features(_rec(np.zeros((31, 1000))))
        assert seq.frames.shape == (100, 155)
        assert np.all(seq.frames == 0)
        assert not seq.reduced and seq.frame_rate_hz == 100.0

    def test_frame_count_ceil(self):
        assert features.extract_features(_rec(np.zeros((31, 995)))).n_frames == 100
        assert features.extract_features(_rec(np.zeros((31, 1)))).n_frames == 1

    @given(st.integers(1, 2000), st.integers(1, 40))
    @settings(max_examples=50, deadline=None)
    def test_frame_count_property(self, n, hop):
        cfg = features.WindowConfig(window_len_samples=20, hop_samples=hop)
        seq = features.extract_features(_rec(np.zeros((31, n))), cfg)
        assert seq.n_frames == math.ceil(n / hop)

    def test_constant_channel_block(self):
        x = np.zeros((31, 1000))
        x[6] = 2.0
        frames = features.extract_features(_rec(x)).frames
        block = frames[10:, 30:35]  # full windows only; channel 7 -> dims 31..35
        np.testing.assert_allclose(block, np.tile([2.0, 0.0, 2.0, 0.0, 0.0], (90, 1)), atol=1e-12)
        others = np.delete(frames, np.s_[30:35], axis=1)
        assert np.all(others == 0)

    def test_windows_are_causal_and_left_padded(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(31, 437))
        cfg = features.WindowConfig(window_len_samples=100, hop_samples=10)
        frames = features.extract_features(_rec(x), cfg).frames
        for t in (0, 3, 9, 10, 27, 43):
            end = t * 10
            win = np.concatenate([np.zeros(max(0, 99 - end)), x[2, max(0, end - 99) : end + 1]])
            assert len(win) == 100
            want = [rms_oracle(win), zcr_oracle(win), mean_oracle(win), kurtosis_oracle(win), pse_oracle(win)]
            got = frames[t, features.feature_index(3, 1) - 1 : features.feature_index(3, 5)]
            np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_layout_round_trip(self):
        for c in range(1, 32):
            for f in range(1, 6):
                d = features.feature_index(c, f)
                assert d == 5 * (c - 1) + f
                assert features.feature_location(d) == (c, f)

    def test_amplitude_scaling(self):
        x = np.random.default_rng(2).normal(size=(31, 700))
        a = features.extract_features(_rec(x)).frames.reshape(-1, 31, 5)
        b = features.extract_features(_rec(2 * x)).frames.reshape(-1, 31, 5)
        np.testing.assert_allclose(b[..., [0, 2]], 2 * a[..., [0, 2]], rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(b[..., [1, 3, 4]], a[..., [1, 3, 4]], rtol=1e-9, atol=1e-12)

    def test_wrong_channel_count(self):
        class Fake:
            channels = np.zeros((30, 100))

        with pytest.raises(DataError):
            features.extract_features(Fake())


class TestFeatureFile:
    def test_round_trip(self, tmp_path):
        frames = np.random.default_rng(0).normal(size=(13, 155))
        seq = features.FeatureSequence(frames, meta={"sentence_id": 4, "subject_id": "2"})
        path = tmp_path / "x.eegf"
        features.save_features(seq, path)
        raw = path.read_bytes()
        assert raw[:4] == b"EEGF"
        back = features.load_features(path)
        np.testing.assert_array_equal(back.frames, frames.astype(np.float32))
        assert back.meta["sentence_id"] == 4 and not back.reduced

    def test_bad_magic_and_version(self, tmp_path):
        p = tmp_path / "bad.eegf"
        p.write_bytes(b"XXXX" + b"\0" * 20)
        with pytest.raises(DataError, match="magic"):
            features.load_features(p)
        seq = features.FeatureSequence(np.zeros((2, 3)))
        features.save_features(seq, p)
        raw = bytearray(p.read_bytes())
        raw[4] = 9
        p.write_bytes(bytes(raw))
        with pytest.raises(DataError, match="version"):
            features.load_features(p)
