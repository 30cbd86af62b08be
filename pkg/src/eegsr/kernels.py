"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``EEGSR_PURE_PYTHON=1``
to force the numpy fallback. ``BACKEND`` names the active choice.
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("EEGSR_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"


def sos_filter(sos, x, backend=None):
    """Filter each row of ``x`` through the cascade ``sos`` (n_sections x 6)."""
    impl = _pick(backend)
    sos = np.ascontiguousarray(sos, dtype=np.float64)
    x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
    return impl.sos_filter(sos, x)


def ctc_alpha_beta(logp, label, blank, backend=None):
    impl = _pick(backend)
    logp = np.ascontiguousarray(logp, dtype=np.float64)
    label = np.ascontiguousarray(label, dtype=np.int64)
    log_z, post = impl.ctc_alpha_beta(logp, label, int(blank))
    return float(log_z), np.asarray(post)


def edit_ops(ref, hyp, backend=None):
    """Token lists are interned to integer ids before reaching the kernel."""
    impl = _pick(backend)
    vocab = {}
    r = np.array([vocab.setdefault(tok, len(vocab)) for tok in ref], dtype=np.int64)
    h = np.array([vocab.setdefault(tok, len(vocab)) for tok in hyp], dtype=np.int64)
    return tuple(int(v) for v in impl.edit_ops(r, h))


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {backend!r}")
