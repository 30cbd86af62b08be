"""Character inventory shared by the model, the LM and the decoder."""

from .errors import ParameterError

SYMBOLS = "abcdefghijklmnopqrstuvwxyz '"
BLANK = len(SYMBOLS)
N_CLASSES = len(SYMBOLS) + 1
_INDEX = {c: i for i, c in enumerate(SYMBOLS)}


def encode(text):
    try:
        return [_INDEX[c] for c in text]
    except KeyError as exc:
        raise ParameterError(f"character {exc.args[0]!r} is not in the alphabet") from None


def decode(indices):
    return "".join(SYMBOLS[i] for i in indices)


def is_valid(text):
    return all(c in _INDEX for c in text)
