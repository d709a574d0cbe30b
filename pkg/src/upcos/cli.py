"""Command-line interface.

Subcommands::

    gen      synthetic corpus -> embeddings.txt, labels.txt, trials.txt
    stats    covariance diagonals (+ optional PLDA model) from labeled embeddings
    score    score a trial list with cos, up1..up4, plda or up-plda
    metrics  EER / minDCF of a score file against labeled trials
    analyze  duration vs average uncertainty, with Pearson correlation

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error, 4 data
integrity error.  Every failure prints one line starting with ``error:``.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import fileio
from .errors import (
    ConfigurationError,
    EstimationError,
    MetricError,
    SamplingError,
    UpcosError,
)
from .metrics import (
    DEFAULT_C_FA,
    DEFAULT_C_MISS,
    DEFAULT_P_TARGET,
    avg_uncertainty_scalar,
    dcf_curve,
    eer_from_rates,
    error_sweep,
    histogram,
    pearson,
)
from .plda import plda_fit
from .scoring import THREADS_ENV, ScoreVariant, score_trials
from .stats import estimate_covariances, summarize_boxplot
from .synth import SynthConfig, generate_corpus, generate_trials, pair_counts

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 2, 3, 4
DEFAULT_TRIALS = 1000

VARIANT_HELP = (
    "cos: cosine; up1: Sigma = Su/d + I per side; up2: Sigma = (Su + Stot)/d per side; "
    "up3: shared Sigma = (Sue + Sut)/d + I; up4: shared Sigma = (Sue + Sut + Stot)/d; "
    "plda / up-plda: two-covariance PLDA without / with uncertainty"
)


class CliError(Exception):
    def __init__(self, msg, code=EXIT_USAGE):
        super().__init__(msg)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"usage: {message}", EXIT_USAGE)


def _one_line(msg):
    return " ".join(str(msg).split())


# gen

_GEN_FLAGS = {
    "seed": "seed", "speakers": "n_speakers", "utts": "utts_per_speaker", "dz": "d_z",
    "dim": "d", "fps": "frames_per_second", "between_var": "between_var",
    "within_var": "within_var", "frame_noise_var": "frame_noise_var",
    "heteroscedasticity": "heteroscedasticity", "embedding_scale": "embedding_scale",
    "mismatch": "precision_mismatch",
}


def _gen_config(args) -> SynthConfig:
    data = {}
    if args.config:
        with open(args.config) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as err:
                raise CliError(f"config {args.config}: {err}") from None
        if not isinstance(data, dict):
            raise CliError(f"config {args.config}: expected a JSON object")
    for flag, key in _GEN_FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            data[key] = v
    if args.dmin is not None or args.dmax is not None:
        lo, hi = data.get("duration_range_s", SynthConfig.duration_range_s)
        data["duration_range_s"] = (args.dmin if args.dmin is not None else lo,
                                    args.dmax if args.dmax is not None else hi)
    if args.profile == "full":
        data = {"d_z": 256, "d": 192, **data}
    return SynthConfig.from_dict(data)


def cmd_gen(args):
    cfg = _gen_config(args)
    corpus = generate_corpus(cfg, workers=args.threads)
    avail_t, avail_n = pair_counts(corpus.labels)
    n_t = min(DEFAULT_TRIALS, avail_t) if args.targets is None else args.targets
    n_n = min(DEFAULT_TRIALS, avail_n) if args.nontargets is None else args.nontargets
    trial_seed = cfg.seed if args.trial_seed is None else args.trial_seed
    trials = generate_trials(corpus.labels, n_t, n_n, trial_seed)

    os.makedirs(args.out, exist_ok=True)
    fileio.write_embeddings(os.path.join(args.out, "embeddings.txt"), corpus.embeddings)
    fileio.write_labels(os.path.join(args.out, "labels.txt"), corpus.labels)
    fileio.write_trials(os.path.join(args.out, "trials.txt"), trials)
    with open(os.path.join(args.out, "config.json"), "w") as f:
        json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {len(corpus.embeddings)} embeddings, {len(trials)} trials to {args.out}")


# stats

def cmd_stats(args):
    embs = fileio.read_embeddings(args.embeddings)
    labels = fileio.read_labels(args.labels)
    missing = [i for i in embs if i not in labels]
    if missing:
        raise CliError(f"no label for {len(missing)} utterance(s): {' '.join(missing[:10])}")
    report = estimate_covariances(embs, labels)
    model = None
    if args.plda:
        try:
            model = plda_fit(embs, labels)
        except EstimationError as err:
            raise CliError(f"cannot fit PLDA: {err}", EXIT_DATA) from None
    fileio.write_stats(args.out, report, summarize_boxplot(report), model)
    print(f"n_utts={report.n_utts} n_speakers={report.n_speakers} dim={report.dim}")


# score

def cmd_score(args):
    variant = ScoreVariant(args.variant)
    stats = None
    if variant.needs_total or variant.is_plda:
        if not args.stats:
            raise CliError(f"variant {variant.value} requires --stats")
        stats = fileio.read_stats(args.stats)
        if variant.is_plda and stats.plda is None:
            raise CliError(f"variant {variant.value} requires a [plda] section in {args.stats}")
    enrol = fileio.read_embeddings(args.enrol)
    test = enrol if not args.test or args.test == args.enrol else fileio.read_embeddings(args.test)
    trials = fileio.read_trials(args.trials)
    scores = score_trials(
        trials, enrol, variant,
        sigma_tot_diag=stats.report.total_diag if stats is not None else None,
        plda_model=stats.plda if stats is not None else None,
        workers=args.threads, test_embeddings=test,
    )
    fileio.write_scores(args.out, scores)
    if args.alphas or args.alpha_hist:
        if variant.is_plda:
            raise CliError("alpha factors are only defined for cosine variants")
        if args.alphas:
            fileio.write_alphas(args.alphas, scores)
        if args.alpha_hist:
            prod = np.array([s.alpha_e * s.alpha_t for s in scores])
            counts, edges = histogram(prod, bins=args.bins)
            fileio.write_histogram_csv(args.alpha_hist, counts, edges)


# metrics

def cmd_metrics(args):
    scored = fileio.read_scores(args.scores)
    labels = {}
    for t in fileio.read_trials(args.trials):
        labels.setdefault((t.enrol, t.test), t.label)
    tar, non = [], []
    for e, t, s in scored:
        lab = labels.get((e, t))
        if lab is None:
            raise CliError(f"trial {e} {t} has no target/nontarget label")
        (tar if lab else non).append(s)
    if not tar or not non:
        raise CliError("need at least one target and one nontarget trial")
    p, cm, cf = args.dcf_ptarget, args.dcf_cmiss, args.dcf_cfa
    try:
        sw = error_sweep(tar, non)
        dcf = dcf_curve(sw.far, sw.frr, p, cm, cf)
    except MetricError as err:
        raise CliError(str(err)) from None
    eer, _ = eer_from_rates(sw.far, sw.frr)
    print(f"# p_target={fileio.fmt(p)} c_miss={fileio.fmt(cm)} c_fa={fileio.fmt(cf)}")
    print(f"eer={fileio.fmt(eer)} min_dcf={fileio.fmt(dcf.min())} "
          f"n_target={len(tar)} n_nontarget={len(non)}")
    if args.csv:
        fileio.write_sweep_csv(args.csv, sw.thresholds, sw.far, sw.frr, dcf)


# analyze

def cmd_analyze(args):
    try:
        embs = fileio.read_embeddings(args.embeddings)
    except fileio.FormatError as err:
        if err.lineno == 0:
            raise CliError(str(err)) from None
        raise
    if not embs:
        raise CliError(f"{args.embeddings}: no embeddings")
    no_dur = [k for k, e in embs.items() if e.duration_s is None]
    if no_dur:
        raise CliError(f"{len(no_dur)} embedding(s) lack a duration, e.g. {no_dur[0]}")
    rows = [(k, e.duration_s, avg_uncertainty_scalar(e)) for k, e in embs.items()]
    r = pearson([x[1] for x in rows], [x[2] for x in rows])
    if args.out:
        fileio.write_analysis_csv(args.out, rows)
    print(f"pearson={fileio.fmt(r)}")


def build_parser():
    p = _Parser(prog="upcos", description="Uncertainty-aware speaker verification scoring.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic corpus")
    g.add_argument("--config", help="JSON file with SynthConfig fields; flags override it")
    g.add_argument("--profile", choices=["default", "full"], default="default",
                   help="full: d_z=256, d=192")
    g.add_argument("--seed", type=int)
    g.add_argument("--speakers", type=int)
    g.add_argument("--utts", type=int, help="utterances per speaker")
    g.add_argument("--dz", type=int, help="latent frame dimension")
    g.add_argument("--dim", type=int, help="embedding dimension")
    g.add_argument("--dmin", type=float, help="minimum duration (s)")
    g.add_argument("--dmax", type=float, help="maximum duration (s)")
    g.add_argument("--fps", type=float, help="frames per second")
    g.add_argument("--between-var", type=float)
    g.add_argument("--within-var", type=float)
    g.add_argument("--frame-noise-var", type=float)
    g.add_argument("--heteroscedasticity", type=float)
    g.add_argument("--embedding-scale", type=float)
    g.add_argument("--mismatch", type=float, help="multiplier on the reported frame precision")
    g.add_argument("--targets", type=int, help=f"target trials (default min({DEFAULT_TRIALS}, available))")
    g.add_argument("--nontargets", type=int, help=f"nontarget trials (default min({DEFAULT_TRIALS}, available))")
    g.add_argument("--trial-seed", type=int, help="trial sampling seed (default: --seed)")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("stats", help="corpus covariance statistics")
    s.add_argument("--embeddings", required=True)
    s.add_argument("--labels", required=True, help="'<utt> <speaker>' lines")
    s.add_argument("--plda", action="store_true", help="also fit and store a PLDA model")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_stats)

    c = sub.add_parser("score", help="score trials", description=VARIANT_HELP)
    c.add_argument("--enrol", required=True)
    c.add_argument("--test", help="test embeddings (default: same file as --enrol)")
    c.add_argument("--trials", required=True)
    c.add_argument("--variant", required=True, choices=[v.value for v in ScoreVariant],
                   help=VARIANT_HELP)
    c.add_argument("--stats", help="stats file ([total] for up2/up4, [plda] for plda variants)")
    c.add_argument("--out", required=True)
    c.add_argument("--alphas", help="write '<enrol> <test> <alpha_e> <alpha_t>' per trial")
    c.add_argument("--alpha-hist", help="write a CSV histogram of alpha_e * alpha_t")
    c.add_argument("--bins", type=int, default=50)
    c.set_defaults(func=cmd_score)

    m = sub.add_parser("metrics", help="EER and minDCF")
    m.add_argument("--scores", required=True)
    m.add_argument("--trials", required=True, help="labeled trial file")
    m.add_argument("--dcf-ptarget", type=float, default=DEFAULT_P_TARGET)
    m.add_argument("--dcf-cmiss", type=float, default=DEFAULT_C_MISS)
    m.add_argument("--dcf-cfa", type=float, default=DEFAULT_C_FA)
    m.add_argument("--csv", help="write the threshold sweep as CSV")
    m.set_defaults(func=cmd_metrics)

    a = sub.add_parser("analyze", help="duration vs uncertainty")
    a.add_argument("--embeddings", required=True)
    a.add_argument("--out", help="CSV 'id,duration_s,avg_uncertainty'")
    a.set_defaults(func=cmd_analyze)

    for sp in (g, c):
        sp.add_argument("--threads", type=int,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
        return EXIT_OK
    except CliError as err:
        code, msg = err.code, str(err)
    except (ConfigurationError, SamplingError, MetricError) as err:
        code, msg = EXIT_USAGE, str(err)
    except fileio.FormatError as err:
        code, msg = EXIT_DATA, str(err)
    except OSError as err:
        code, msg = EXIT_IO, f"{err.strerror or err}: {err.filename or ''}".rstrip(": ")
    except UpcosError as err:
        code, msg = EXIT_DATA, str(err)
    print(f"error: {_one_line(msg)}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
