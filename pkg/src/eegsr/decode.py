"""Greedy CTC decoding, a character 4-gram LM and LM-fused prefix beam search."""

import math
import struct
from collections import defaultdict

import numpy as np

from .alphabet import BLANK, SYMBOLS
from .errors import ArtifactError, DataError, ParameterError

START = "^"
END = "$"
LM_VOCAB = SYMBOLS + END  # predicted outcomes: 28 symbols + end marker
_LM_INDEX = {c: i for i, c in enumerate(LM_VOCAB)}

LM_MAGIC = b"CLM4"
LM_VERSION = 1


def greedy_decode(lattice):
    """Best-path decoding: argmax per frame, merge repeats, drop blanks."""
    path = np.argmax(np.asarray(lattice), axis=1)
    out = []
    prev = None
    for k in path:
        if k != prev and k != BLANK:
            out.append(SYMBOLS[k])
        prev = k
    return "".join(out)


class CharLm:
    """Interpolated absolute-discount character n-gram model.

    ``counts`` maps a history string (0..order-1 characters, ``^`` for
    sentence-start padding) to a count vector over ``LM_VOCAB``.
    """

    def __init__(self, counts, order=4, discount=0.75):
        self.order = order
        self.discount = discount
        self.counts = counts
        self._cache = {}

    @classmethod
    def uniform(cls, order=4):
        return cls({"": np.zeros(len(LM_VOCAB))}, order=order)

    def context(self, history):
        """The part of ``history`` the model conditions on: its last order-1 chars."""
        return history[-(self.order - 1) :] if self.order > 1 else ""

    def start_history(self):
        return START * (self.order - 1)

    def distribution(self, history):
        """Next-symbol probabilities after ``history``."""
        h = self.context(history)
        try:
            return self._cache[h]
        except KeyError:
            pass
        if h == "":
            p = self._interpolate("", np.full(len(LM_VOCAB), 1.0 / len(LM_VOCAB)))
        else:
            lower = self.distribution(h[1:])
            p = self._interpolate(h, lower) if h in self.counts else lower
        p.setflags(write=False)
        self._cache[h] = p
        return p

    def _interpolate(self, h, lower):
        c = self.counts.get(h)
        if c is None or c.sum() == 0:
            return lower.copy()
        total = c.sum()
        seen = np.count_nonzero(c)
        return np.maximum(c - self.discount, 0.0) / total + (self.discount * seen / total) * lower

    def prob(self, symbol, history=""):
        return float(self.distribution(history)[_LM_INDEX[symbol]])

    def log_distribution(self, history):
        key = ("log", self.context(history))
        try:
            return self._cache[key]
        except KeyError:
            with np.errstate(divide="ignore"):
                lp = np.log(self.distribution(history))
            self._cache[key] = lp
            return lp


def train_char_lm(corpus, order=4, discount=0.75):
    if not corpus:
        raise DataError("language-model corpus is empty")
    counts = defaultdict(lambda: np.zeros(len(LM_VOCAB)))
    for n, text in enumerate(corpus):
        bad = [c for c in text if c not in SYMBOLS]
        if bad:
            raise DataError(f"transcript {n} ({text!r}) has characters outside the alphabet: {bad[0]!r}")
        seq = START * (order - 1) + text + END
        for i in range(order - 1, len(seq)):
            k = _LM_INDEX[seq[i]]
            for n_hist in range(order):
                counts[seq[i - n_hist : i]][k] += 1
    return CharLm(dict(counts), order=order, discount=discount)


def lm_score(lm, text, complete=False):
    """Sum of log P(char | previous order-1 chars); adds the end marker if ``complete``."""
    bad = [c for c in text if c not in SYMBOLS]
    if bad:
        raise ParameterError(f"character {bad[0]!r} is not in the alphabet")
    total = 0.0
    hist = lm.start_history()
    for c in text + (END if complete else ""):
        total += math.log(lm.prob(c, hist))
        hist = lm.context(hist + c)
    return total


def save_lm(lm, path):
    keys = sorted(lm.counts)
    with open(path, "wb") as fh:
        fh.write(LM_MAGIC)
        vocab = LM_VOCAB.encode("utf-8")
        fh.write(struct.pack("<IIdI", LM_VERSION, lm.order, lm.discount, len(vocab)) + vocab)
        fh.write(struct.pack("<I", len(keys)))
        for k in keys:
            kb = k.encode("utf-8")
            fh.write(struct.pack("<I", len(kb)) + kb)
            fh.write(np.ascontiguousarray(lm.counts[k], dtype="<f8").tobytes())
            with np.errstate(divide="ignore"):
                fh.write(np.log(lm.distribution(k)).astype("<f8").tobytes())


def load_lm(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ArtifactError(f"cannot read language model {path}: {exc}") from exc
    if data[:4] != LM_MAGIC:
        raise ArtifactError(f"{path}: not a character LM (bad magic)")
    version, order, discount, nv = struct.unpack_from("<IIdI", data, 4)
    if version != LM_VERSION:
        raise ArtifactError(f"{path}: LM version {version}, expected {LM_VERSION}")
    off = 24
    vocab = data[off : off + nv].decode("utf-8")
    if vocab != LM_VOCAB:
        raise ArtifactError(f"{path}: LM vocabulary differs from this build")
    off += nv
    (n_ctx,) = struct.unpack_from("<I", data, off)
    off += 4
    V = len(LM_VOCAB)
    counts = {}
    for _ in range(n_ctx):
        (kl,) = struct.unpack_from("<I", data, off)
        key = data[off + 4 : off + 4 + kl].decode("utf-8")
        off += 4 + kl
        counts[key] = np.frombuffer(data, dtype="<f8", count=V, offset=off).copy()
        off += 16 * V  # counts, then the stored log-probs (derivable, skipped)
    return CharLm(counts, order=order, discount=discount)


def beam_search(lattice, lm=None, beam_width=25, lm_weight=0.5, ins_bonus=0.1, nbest=None):
    """CTC prefix beam search with shallow LM fusion.

    Each hypothesis is ranked by ``logaddexp(p_blank, p_nonblank) +
    lm_weight * log P_lm(prefix) + ins_bonus * len(prefix)``. Returns the
    surviving prefixes as ``[(text, fused_score), ...]``, best first.
    """
    if beam_width < 1:
        raise ParameterError("beam width must be >= 1")
    lat = np.asarray(lattice, dtype=np.float64)
    n_sym = len(SYMBOLS)
    use_lm = lm is not None and lm_weight != 0.0

    # prefix -> [p_blank, p_nonblank, lm_logprob]
    beams = {"": [0.0, -math.inf, 0.0]}
    for row in lat:
        lp_blank = row[BLANK]
        lp_sym = row[:n_sym]
        nxt = {}
        for prefix, (pb, pnb, lmlp) in beams.items():
            total = np.logaddexp(pb, pnb)
            stay_b = total + lp_blank
            stay_nb = pnb + lp_sym[_LM_INDEX[prefix[-1]]] if prefix else -math.inf
            cur = nxt.get(prefix)
            if cur is None:
                nxt[prefix] = [stay_b, stay_nb, lmlp]
            else:
                cur[0] = np.logaddexp(cur[0], stay_b)
                cur[1] = np.logaddexp(cur[1], stay_nb)

            ext = total + lp_sym
            if prefix:
                last = _LM_INDEX[prefix[-1]]
                ext[last] = pb + lp_sym[last]
            if use_lm:
                lm_next = lmlp + lm.log_distribution(lm.start_history() + prefix)[:n_sym]
            else:
                lm_next = np.full(n_sym, lmlp)
            for k in range(n_sym):
                e = ext[k]
                if e == -math.inf:
                    continue
                cand = prefix + SYMBOLS[k]
                cur = nxt.get(cand)
                if cur is None:
                    nxt[cand] = [-math.inf, e, lm_next[k]]
                else:
                    cur[1] = np.logaddexp(cur[1], e)
        beams = _prune(nxt, beam_width, lm_weight, ins_bonus)

    ranked = sorted(
        ((p, _fused(p, v, lm_weight, ins_bonus)) for p, v in beams.items()),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked[:nbest] if nbest else ranked


def _fused(prefix, v, lm_weight, ins_bonus):
    return float(np.logaddexp(v[0], v[1])) + lm_weight * v[2] + ins_bonus * len(prefix)


def _prune(cands, width, lm_weight, ins_bonus):
    scored = sorted((-_fused(p, v, lm_weight, ins_bonus), p) for p, v in cands.items())
    return {p: cands[p] for _, p in scored[:width]}
