"""Word and character error rates, and the vocabulary-sweep report."""

import logging
from dataclasses import dataclass

from . import kernels
from .errors import ParameterError

log = logging.getLogger(__name__)

SUBSET_SIZES = (5, 10, 15, 20, 25, 30)
REPORT_COLUMNS = ("k", "total_sentences", "unique_sentences", "total_words", "unique_words", "letters", "wer", "cer")


def edit_distance(ref, hyp):
    """Levenshtein alignment counts ``(substitutions, deletions, insertions)``.

    Among minimum-cost alignments the backtrace takes diagonal moves first,
    so a substitution is preferred over a deletion/insertion pair.
    """
    return kernels.edit_ops(list(ref), list(hyp))


def _pooled(pairs, tokenize):
    pairs = list(pairs)
    errors = n_ref = 0
    for ref, hyp in pairs:
        r, h = tokenize(ref), tokenize(hyp)
        errors += sum(edit_distance(r, h))
        n_ref += len(r)
    if n_ref == 0:
        raise ParameterError("reference corpus is empty")
    return 100.0 * errors / n_ref


def wer(pairs):
    """Corpus-level WER in percent: total edits over total reference words."""
    return _pooled(pairs, str.split)


def cer(pairs):
    """Corpus-level CER in percent; spaces are tokens too."""
    return _pooled(pairs, list)


def sentence_mean_wer(pairs):
    rates = []
    for ref, hyp in pairs:
        r = ref.split()
        if r:
            rates.append(100.0 * sum(edit_distance(r, hyp.split())) / len(r))
    if not rates:
        raise ParameterError("reference corpus is empty")
    return sum(rates) / len(rates)


@dataclass
class ReportRow:
    k: int
    total_sentences: int
    unique_sentences: int
    total_words: int
    unique_words: int
    letters: int
    wer: float = None
    cer: float = None
    wer_sentence_mean: float = None

    @property
    def absent(self):
        return self.total_sentences == 0


@dataclass
class EvalReport:
    rows: list

    def to_csv(self):
        lines = [",".join(REPORT_COLUMNS)]
        for r in self.rows:
            w = "" if r.wer is None else f"{r.wer:.2f}"
            c = "" if r.cer is None else f"{r.cer:.2f}"
            lines.append(
                f"{r.k},{r.total_sentences},{r.unique_sentences},{r.total_words},"
                f"{r.unique_words},{r.letters},{w},{c}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self):
        head = ("k", "sentences", "unique sent.", "words", "unique words", "letters", "WER %", "CER %", "WER % (sent. mean)")
        body = []
        for r in self.rows:
            fmt = lambda v: "-" if v is None else f"{v:.2f}"  # noqa: E731
            body.append(
                (str(r.k), str(r.total_sentences), str(r.unique_sentences), str(r.total_words),
                 str(r.unique_words), str(r.letters), fmt(r.wer), fmt(r.cer), fmt(r.wer_sentence_mean))
            )
        widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
        out = ["  ".join(h.rjust(w) for h, w in zip(head, widths))]
        out += ["  ".join(c.rjust(w) for c, w in zip(b, widths)) for b in body]
        return "\n".join(out) + "\n"


def vocab_sweep(testset, subset_sizes=SUBSET_SIZES):
    """One row per k over test items whose sentence id is among the first k.

    ``testset`` holds ``(reference, hypothesis, sentence_id)`` triples.
    """
    testset = list(testset)
    rows = []
    for k in subset_sizes:
        items = [(ref, hyp) for ref, hyp, sid in testset if sid <= k]
        refs = [ref for ref, _ in items]
        words = [w for ref in refs for w in ref.split()]
        row = ReportRow(
            k=k,
            total_sentences=len(items),
            unique_sentences=len({sid for _, _, sid in testset if sid <= k}),
            total_words=len(words),
            unique_words=len(set(words)),
            letters=sum(len(ref.replace(" ", "")) for ref in refs),
        )
        if row.absent or row.total_words == 0:
            log.warning("vocabulary subset k=%d has no test items; row left empty", k)
        else:
            row.wer = wer(items)
            row.cer = cer(items)
            row.wer_sentence_mean = sentence_mean_wer(items)
        rows.append(row)
    return EvalReport(rows)
