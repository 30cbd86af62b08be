"""Command-line entry point: ``eegsr <stage> [options]``.

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric/training error.
"""

import argparse
import logging
import sys

from . import config as config_mod
from . import pipeline
from .errors import EegsrError

# flag -> (config section, field)
OVERRIDES = {
    "work_dir": (None, "work_dir"),
    "data_dir": (None, "data_dir"),
    "seed": (None, "seed"),
    "n_subjects": ("synth", "n_subjects"),
    "n_sentences": ("synth", "n_sentences"),
    "sentences_file": ("synth", "sentences_file"),
    "noise_std": ("synth", "noise_std"),
    "notch_q": ("filters", "notch_q"),
    "window_len": ("window", "window_len_samples"),
    "kpca_gamma": ("kpca", "gamma"),
    "kpca_coef0": ("kpca", "coef0"),
    "pool_cap": ("kpca", "pool_cap"),
    "epochs": ("train", "epochs"),
    "lr": ("train", "lr"),
    "beam_width": ("decode", "beam_width"),
    "lm_weight": ("decode", "lm_weight"),
    "ins_bonus": ("decode", "ins_bonus"),
    "nbest": ("decode", "nbest"),
    "lm_corpus": ("decode", "lm_corpus"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline JSON config")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, default=1, help="worker threads per stage")
    common.add_argument("--work-dir")
    common.add_argument("--data-dir", help="raw recordings + manifest.csv (default <work-dir>/raw)")
    common.add_argument("-v", "--verbose", action="store_true")
    g = common.add_argument_group("stage overrides")
    g.add_argument("--n-subjects", type=int)
    g.add_argument("--n-sentences", type=int)
    g.add_argument("--sentences-file")
    g.add_argument("--noise-std", type=float)
    g.add_argument("--notch-q", type=float)
    g.add_argument("--window-len", type=int)
    g.add_argument("--kpca-gamma", type=float)
    g.add_argument("--kpca-coef0", type=float)
    g.add_argument("--pool-cap", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--beam-width", type=int)
    g.add_argument("--lm-weight", type=float)
    g.add_argument("--ins-bonus", type=float)
    g.add_argument("--nbest", type=int)
    g.add_argument("--lm-corpus")

    parser = argparse.ArgumentParser(prog="eegsr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in pipeline.STAGES + ("run-all",):
        sub.add_parser(stage, parents=[common])
    return parser


def resolve_config(args):
    cfg = config_mod.load_config(args.config) if args.config else config_mod.PipelineConfig()
    for attr, (section, key) in OVERRIDES.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg = config_mod.override(cfg, section, **{key: value})
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if args.stage == "run-all":
            pipeline.run_all(cfg, threads=args.threads)
        else:
            print(pipeline.RUNNERS[args.stage](cfg, threads=args.threads))
    except EegsrError as exc:
        print(f"eegsr {args.stage}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
