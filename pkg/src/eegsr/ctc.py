"""CTC loss and its gradient with respect to pre-softmax logits."""

import numpy as np

from . import kernels
from .alphabet import BLANK
from .errors import FeasibilityError, ParameterError


def min_frames(label):
    """Fewest frames that can emit ``label``: one per symbol plus a blank between repeats."""
    repeats = sum(1 for a, b in zip(label, label[1:]) if a == b)
    return len(label) + repeats


def ctc_loss(logprobs, label, blank=BLANK, backend=None):
    """Negative log-likelihood of ``label`` under a (T, C) log-prob lattice.

    Returns ``(loss, grad)`` where ``grad[t, k] = softmax[t, k] - posterior[t, k]``
    is the derivative with respect to the logits that produced the lattice.
    """
    logprobs = np.asarray(logprobs, dtype=np.float64)
    if logprobs.ndim != 2 or logprobs.shape[0] < 1:
        raise ParameterError("lattice must be a (T, C) matrix with T >= 1")
    T, C = logprobs.shape
    label = [int(c) for c in label]
    for c in label:
        if not 0 <= c < C or c == blank:
            raise ParameterError(f"label symbol {c} outside the alphabet")
    need = min_frames(label)
    if T < need:
        raise FeasibilityError(f"label needs at least {need} frames, lattice has {T}")
    log_z, post = ctc_posteriors(logprobs, label, blank, backend=backend)
    if not np.isfinite(log_z):
        raise FeasibilityError("label has zero probability under this lattice")
    grad = np.exp(logprobs) - post
    return -log_z, grad


def ctc_posteriors(logprobs, label, blank=BLANK, backend=None):
    """Forward-backward pass: ``(log P(label), per-frame class posteriors)``."""
    return kernels.ctc_alpha_beta(logprobs, label, blank, backend=backend)
