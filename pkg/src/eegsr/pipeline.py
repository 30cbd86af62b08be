"""Pipeline stages. Each reads the previous stage's files under ``work_dir``.

Layout::

    <work_dir>/raw/            recordings + manifest.csv (synth output)
    <work_dir>/preprocessed/   filtered recordings + manifest.csv
    <work_dir>/features/       155-dim .eegf files + index.csv
    <work_dir>/split.json      train/test recording names
    <work_dir>/kpca/           projector.kpca, explained_variance.csv
    <work_dir>/reduced/        20-dim .eegf files + index.csv
    <work_dir>/lm/             char4.clm
    <work_dir>/model/          checkpoint.eegc, loss_curve.csv
    <work_dir>/decode/         hypotheses.csv, nbest.jsonl
    <work_dir>/eval/           report.csv, report.txt
"""

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import data, decode, dsp, evaluation, features, kpca, net, train
from .config import PipelineConfig
from .errors import ArtifactError, DataError

log = logging.getLogger(__name__)

STAGES = (
    "synth",
    "preprocess",
    "features",
    "kpca-fit",
    "kpca-transform",
    "lm-train",
    "train",
    "decode",
    "eval",
)

HYP_FIELDS = ("path", "subject", "session", "sentence_id", "reference", "hypothesis", "greedy", "score")


def _dir(cfg, *parts):
    path = os.path.join(cfg.work_dir, *parts)
    os.makedirs(path, exist_ok=True)
    return path


def _echo(cfg, directory):
    with open(os.path.join(directory, "config.json"), "w") as fh:
        fh.write(cfg.to_json() + "\n")


def _need(path, stage):
    if not os.path.exists(path):
        raise ArtifactError(f"missing artifact {path} (run the '{stage}' stage first)")
    return path


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def synth_config(cfg):
    s = cfg.synth
    sentences = data.read_sentences(s.sentences_file) if s.sentences_file else data.default_sentences()
    return data.SynthConfig(
        n_subjects=s.n_subjects,
        sessions_per_subject=s.sessions_per_subject,
        sentences=tuple(sentences[: s.n_sentences]),
        char_ms=s.char_ms,
        jitter=s.jitter,
        signal_rms=s.signal_rms,
        noise_std=s.noise_std,
        seed=cfg.seed,
    )


def run_synth(cfg, threads=1):
    scfg = synth_config(cfg)
    recs, manifest = data.synth_generate(scfg)
    out = cfg.raw_dir
    data.write_corpus(recs, manifest, out, scfg)
    _echo(cfg, out)
    return f"synth: {len(recs)} recordings -> {out}"


def run_preprocess(cfg, threads=1):
    manifest = data.load_manifest(_need(os.path.join(cfg.raw_dir, "manifest.csv"), "synth"))
    f = cfg.filters
    bp = dsp.design_bandpass(f.band_lo_hz, f.band_hi_hz)
    notch = dsp.design_notch(f.notch_hz, f.notch_q)
    out = _dir(cfg, "preprocessed")

    def one(entry):
        rec = data.load_recording(entry, manifest)
        rec = dsp.preprocess_recording(rec, bp, notch)
        name = os.path.basename(entry.path)
        data.write_recording(rec, os.path.join(out, name))
        return replace(entry, path=name)

    entries = _map(one, manifest.entries, threads)
    data.write_manifest(data.Manifest(entries), os.path.join(out, "manifest.csv"))
    _echo(cfg, out)
    return f"preprocess: {len(entries)} recordings filtered -> {out}"


def run_features(cfg, threads=1):
    src = _dir(cfg, "preprocessed")
    manifest = data.load_manifest(_need(os.path.join(src, "manifest.csv"), "preprocess"))
    wcfg = features.WindowConfig(cfg.window.window_len_samples, cfg.window.hop_samples)
    out = _dir(cfg, "features")

    def one(entry):
        rec = data.load_recording(entry, manifest)
        seq = features.extract_features(rec, wcfg)
        name = _stem(entry.path) + ".eegf"
        features.save_features(seq, os.path.join(out, name))
        return replace(entry, path=name)

    entries = _map(one, manifest.entries, threads)
    data.write_manifest(data.Manifest(entries), os.path.join(out, "index.csv"))
    _echo(cfg, out)
    return f"features: {len(entries)} sequences x {features.RAW_DIM} dims -> {out}"


def load_split(cfg):
    path = _need(os.path.join(cfg.work_dir, "split.json"), "kpca-fit")
    with open(path) as fh:
        split = json.load(fh)
    return set(split["train"]), set(split["test"])


def _index(cfg, sub, stage):
    return data.load_manifest(_need(os.path.join(cfg.work_dir, sub, "index.csv"), stage))


def run_kpca_fit(cfg, threads=1):
    index = _index(cfg, "features", "features")
    train_e, test_e = data.split_train_test(index.entries, cfg.split_ratio, cfg.seed)
    with open(os.path.join(cfg.work_dir, "split.json"), "w") as fh:
        json.dump({"seed": cfg.seed, "ratio": cfg.split_ratio,
                   "train": [_stem(e.path) for e in train_e],
                   "test": [_stem(e.path) for e in test_e]}, fh, indent=1)
    frames = np.vstack([features.load_features(index.resolve(e)).frames for e in train_e])
    pool = kpca.subsample_pool(frames, cfg.kpca.pool_cap, cfg.seed)
    k = cfg.kpca
    proj = kpca.fit(pool, k.n_components, gamma=k.gamma, coef0=k.coef0, degree=k.degree,
                    standardize=k.standardize)
    out = _dir(cfg, "kpca")
    kpca.save_projector(proj, os.path.join(out, "projector.kpca"))
    curve = kpca.explained_variance_curve(proj)
    with open(os.path.join(out, "explained_variance.csv"), "w") as fh:
        fh.write("n_components,cumulative_ratio\n")
        fh.writelines(f"{i},{c:.12g}\n" for i, c in curve)
    _echo(cfg, out)
    kept = curve[k.n_components - 1][1]
    return (f"kpca-fit: pool {pool.shape[0]} frames, {k.n_components} components keep "
            f"{100 * kept:.1f}% of kernel variance -> {out}")


def run_kpca_transform(cfg, threads=1):
    index = _index(cfg, "features", "features")
    proj = kpca.load_projector(_need(os.path.join(cfg.work_dir, "kpca", "projector.kpca"), "kpca-fit"))
    out = _dir(cfg, "reduced")

    def one(entry):
        seq = features.load_features(index.resolve(entry))
        red = features.FeatureSequence(kpca.transform(proj, seq.frames), reduced=True,
                                       frame_rate_hz=seq.frame_rate_hz, meta=seq.meta)
        features.save_features(red, os.path.join(out, entry.path))
        return entry

    entries = _map(one, index.entries, threads)
    data.write_manifest(data.Manifest(entries), os.path.join(out, "index.csv"))
    _echo(cfg, out)
    return f"kpca-transform: {len(entries)} sequences -> {proj.n_components} dims -> {out}"


def _split_entries(cfg, index):
    train_names, test_names = load_split(cfg)
    tr = [e for e in index.entries if _stem(e.path) in train_names]
    te = [e for e in index.entries if _stem(e.path) in test_names]
    return tr, te


def run_lm_train(cfg, threads=1):
    d = cfg.decode
    if d.lm_corpus:
        corpus = data.read_sentences(d.lm_corpus)
        source = d.lm_corpus
    else:
        index = _index(cfg, "features", "features")
        tr, _ = _split_entries(cfg, index)
        by_id = {e.sentence_id: e.transcript for e in tr}
        corpus = [by_id[k] for k in sorted(by_id)]
        source = "training transcripts"
    lm = decode.train_char_lm(corpus, order=d.lm_order, discount=d.lm_discount)
    out = _dir(cfg, "lm")
    decode.save_lm(lm, os.path.join(out, "char4.clm"))
    _echo(cfg, out)
    return f"lm-train: {d.lm_order}-gram on {len(corpus)} sentences ({source}) -> {out}"


def run_train(cfg, threads=1):
    index = _index(cfg, "reduced", "kpca-transform")
    tr, _ = _split_entries(cfg, index)
    seqs = [features.load_features(index.resolve(e)).frames for e in tr]
    stacked = np.vstack(seqs)
    mean = stacked.mean(axis=0)
    scale = stacked.std(axis=0)
    scale[scale == 0] = 1.0
    dataset = [((s - mean) / scale, e.transcript) for s, e in zip(seqs, tr)]
    t = cfg.train
    tcfg = train.TrainConfig(epochs=t.epochs, batch_size=t.batch_size, lr=t.lr, dropout=t.dropout,
                             clip_norm=t.clip_norm, seed=cfg.seed)
    mcfg = net.ModelConfig(input_dim=stacked.shape[1], hidden1=t.hidden1, hidden2=t.hidden2,
                           tcn_filters=t.tcn_filters, tcn_kernel=t.tcn_kernel, dropout=t.dropout)

    def progress(epoch, loss):
        log.info("epoch %d/%d mean CTC loss %.4f", epoch, t.epochs, loss)

    params, curve = train.train(dataset, tcfg, mcfg, progress=progress)
    out = _dir(cfg, "model")
    train.save_checkpoint(os.path.join(out, "checkpoint.eegc"), params, mcfg, tcfg,
                          extra={"input_mean": mean.tolist(), "input_scale": scale.tolist()})
    train.write_loss_curve(os.path.join(out, "loss_curve.csv"), curve)
    _echo(cfg, out)
    return (f"train: {len(dataset)} utterances, {t.epochs} epochs, loss {curve[0]:.3f} -> "
            f"{curve[-1]:.3f} -> {out}")


def run_decode(cfg, threads=1):
    ckpt = _need(os.path.join(cfg.work_dir, "model", "checkpoint.eegc"), "train")
    lm_path = _need(os.path.join(cfg.work_dir, "lm", "char4.clm"), "lm-train")
    params, _, header = train.load_checkpoint(ckpt)
    lm = decode.load_lm(lm_path)
    mean = np.asarray(header["input_mean"])
    scale = np.asarray(header["input_scale"])
    index = _index(cfg, "reduced", "kpca-transform")
    _, te = _split_entries(cfg, index)
    d = cfg.decode

    def one(entry):
        frames = features.load_features(index.resolve(entry)).frames
        lat = net.model_forward(params, (frames - mean) / scale)
        nbest = decode.beam_search(lat, lm, d.beam_width, d.lm_weight, d.ins_bonus, nbest=d.nbest)
        return entry, nbest, decode.greedy_decode(lat)

    results = _map(one, te, threads)
    out = _dir(cfg, "decode")
    with open(os.path.join(out, "hypotheses.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HYP_FIELDS)
        for entry, nbest, greedy in results:
            text, score = nbest[0]
            w.writerow([entry.path, entry.subject, entry.session, entry.sentence_id,
                        entry.transcript, text, greedy, f"{score:.10g}"])
    with open(os.path.join(out, "nbest.jsonl"), "w") as fh:
        for entry, nbest, _ in results:
            fh.write(json.dumps({"path": entry.path, "nbest": nbest}) + "\n")
    _echo(cfg, out)
    return f"decode: {len(results)} test utterances -> {out}"


def read_hypotheses(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != HYP_FIELDS:
            raise DataError(f"{path}: unexpected hypotheses header")
        return [(r["reference"], r["hypothesis"], int(r["sentence_id"])) for r in reader]


def run_eval(cfg, threads=1):
    items = read_hypotheses(_need(os.path.join(cfg.work_dir, "decode", "hypotheses.csv"), "decode"))
    report = evaluation.vocab_sweep(items)
    out = _dir(cfg, "eval")
    with open(os.path.join(out, "report.csv"), "w") as fh:
        fh.write(report.to_csv())
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(report.to_text())
    _echo(cfg, out)
    full = report.rows[-1]
    wer = "n/a" if full.wer is None else f"{full.wer:.2f}%"
    return f"eval: {len(items)} test utterances, WER at k={full.k}: {wer} -> {out}"


RUNNERS = {
    "synth": run_synth,
    "preprocess": run_preprocess,
    "features": run_features,
    "kpca-fit": run_kpca_fit,
    "kpca-transform": run_kpca_transform,
    "lm-train": run_lm_train,
    "train": run_train,
    "decode": run_decode,
    "eval": run_eval,
}


def run_all(cfg: PipelineConfig, threads=1, echo=print):
    os.makedirs(cfg.work_dir, exist_ok=True)
    _echo(cfg, cfg.work_dir)
    for stage in STAGES:
        if stage == "synth" and not cfg.synth.enabled:
            continue
        echo(RUNNERS[stage](cfg, threads))
