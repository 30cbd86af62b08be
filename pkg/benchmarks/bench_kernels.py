"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case runs on identical inputs under both backends; outputs are
checked for agreement before timings are reported.
"""

import argparse
import time

import numpy as np

from eegsr import dsp, kernels
from eegsr.alphabet import BLANK, encode
from eegsr.net import log_softmax


def _best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    sos = np.vstack([dsp.design_bandpass(0.1, 70.0).sections, dsp.design_notch(60.0, 30.0).sections])
    x = rng.normal(size=(31, 6000))
    yield "sos_filter 31ch x 6 s", lambda b: kernels.sos_filter(sos, x, backend=b)

    lat = log_softmax(rng.normal(size=(600, 29)))
    label = encode("the quick brown fox jumps over the lazy dog")
    yield "ctc_alpha_beta T=600 L=43", lambda b: kernels.ctc_alpha_beta(lat, label, BLANK, backend=b)

    words = "the a cat sat on mat dog ran far away".split()
    ref = list(rng.choice(words, size=400))
    hyp = list(rng.choice(words, size=380))
    yield "edit_ops 400 x 380 tokens", lambda b: kernels.edit_ops(ref, hyp, backend=b)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        from eegsr import _ckernels  # noqa: F401
    except ImportError:
        print("compiled extension not built; only the numpy fallback is available")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'case':<28}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, fn in cases(rng):
        tp, out_p = _best_of(lambda: fn("python"), args.repeat)
        tc, out_c = _best_of(lambda: fn("cython"), args.repeat)
        if not _same(out_p, out_c):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<28}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
