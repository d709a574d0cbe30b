"""Text file formats: embeddings, trials, scores, labels and corpus stats.

All formats are whitespace separated, one record per line.  Floats are
written with ``repr`` (shortest string that round-trips), so a write/read
cycle reproduces every value bit for bit.

Embedding file::

    UPEMB1 <d> <count>
    <id> <duration_s or -> <d mean values> <d uncertainty values>

Trial file: ``<enrol> <test> [target|nontarget]``.
Score file: ``<enrol> <test> <score>``.
Label file: ``<utt_id> <speaker_id>``.
Stats file: ``[section]`` headers followed by rows, see :func:`write_stats`.
"""

import csv
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import FormatError, UpcosError
from .plda import PldaModel
from .propagation import UncertainEmbedding
from .scoring import Trial, TrialScore
from .stats import QUANTITIES, CovarianceReport, FiveNumber

EMB_MAGIC = "UPEMB1"
LABEL_TOKENS = {"target": True, "nontarget": False}


def fmt(x) -> str:
    return repr(float(x))


def _fmt_vec(v):
    return " ".join(map(repr, np.asarray(v, dtype=np.float64).tolist()))


def _lines(path):
    """(lineno, tokens) for every non-blank line."""
    with open(path, "r") as f:
        for n, line in enumerate(f, 1):
            toks = line.split()
            if toks:
                yield n, toks


def _float(tok, path, n):
    try:
        return float(tok)
    except ValueError:
        raise FormatError(path, n, f"not a number: {tok!r}") from None


def _floats(toks, path, n):
    return np.array([_float(t, path, n) for t in toks])


# embeddings

def write_embeddings(path, embeddings):
    """Write an iterable or mapping of :class:`UncertainEmbedding`."""
    embs = list(embeddings.values()) if isinstance(embeddings, dict) else list(embeddings)
    d = embs[0].dim if embs else 0
    with open(path, "w") as f:
        f.write(f"{EMB_MAGIC} {d} {len(embs)}\n")
        for e in embs:
            if e.dim != d:
                raise UpcosError(f"{e.id}: dimension {e.dim} differs from {d}")
            dur = "-" if e.duration_s is None else fmt(e.duration_s)
            f.write(f"{e.id} {dur} {_fmt_vec(e.phi)} {_fmt_vec(e.sigma_u_diag)}\n")


def read_embeddings(path) -> Dict[str, UncertainEmbedding]:
    lines = _lines(path)
    try:
        n, head = next(lines)
    except StopIteration:
        raise FormatError(path, 0, "empty embedding file") from None
    if len(head) != 3 or head[0] != EMB_MAGIC:
        raise FormatError(path, n, f"expected header '{EMB_MAGIC} <d> <count>'")
    try:
        d, count = int(head[1]), int(head[2])
    except ValueError:
        raise FormatError(path, n, "header dimension and count must be integers") from None
    if d < 0 or count < 0 or (count > 0 and d < 1):
        raise FormatError(path, n, "invalid header dimension or count")

    out = {}
    for n, toks in lines:
        if len(toks) != 2 + 2 * d:
            raise FormatError(path, n, f"expected {2 + 2 * d} fields, got {len(toks)}")
        uid = toks[0]
        if uid in out:
            raise FormatError(path, n, f"duplicate id {uid}")
        dur = None if toks[1] == "-" else _float(toks[1], path, n)
        vals = _floats(toks[2:], path, n)
        try:
            out[uid] = UncertainEmbedding(uid, vals[:d], vals[d:], dur)
        except UpcosError as err:
            raise FormatError(path, n, str(err)) from None
    if len(out) != count:
        raise FormatError(path, n, f"header announces {count} records, found {len(out)}")
    return out


# trials, scores, labels

def write_trials(path, trials):
    with open(path, "w") as f:
        for t in trials:
            lab = "" if t.label is None else (" target" if t.label else " nontarget")
            f.write(f"{t.enrol} {t.test}{lab}\n")


def read_trials(path) -> List[Trial]:
    out = []
    for n, toks in _lines(path):
        if len(toks) not in (2, 3):
            raise FormatError(path, n, "expected '<enrol> <test> [target|nontarget]'")
        label = None
        if len(toks) == 3:
            if toks[2] not in LABEL_TOKENS:
                raise FormatError(path, n, f"label must be 'target' or 'nontarget', got {toks[2]!r}")
            label = LABEL_TOKENS[toks[2]]
        out.append(Trial(toks[0], toks[1], label))
    return out


def write_scores(path, scores):
    with open(path, "w") as f:
        for s in scores:
            f.write(f"{s.enrol_id} {s.test_id} {fmt(s.score)}\n")


def read_scores(path) -> List[Tuple[str, str, float]]:
    out = []
    for n, toks in _lines(path):
        if len(toks) != 3:
            raise FormatError(path, n, "expected '<enrol> <test> <score>'")
        out.append((toks[0], toks[1], _float(toks[2], path, n)))
    return out


def write_alphas(path, scores: List[TrialScore]):
    with open(path, "w") as f:
        for s in scores:
            f.write(f"{s.enrol_id} {s.test_id} {fmt(s.alpha_e)} {fmt(s.alpha_t)}\n")


def write_labels(path, labels: Dict[str, str]):
    with open(path, "w") as f:
        for utt, spk in labels.items():
            f.write(f"{utt} {spk}\n")


def read_labels(path) -> Dict[str, str]:
    out = {}
    for n, toks in _lines(path):
        if len(toks) != 2:
            raise FormatError(path, n, "expected '<utt_id> <speaker_id>'")
        if toks[0] in out:
            raise FormatError(path, n, f"duplicate id {toks[0]}")
        out[toks[0]] = toks[1]
    return out


# stats

@dataclass
class StatsFile:
    report: CovarianceReport
    boxplot: Dict[str, FiveNumber]
    plda: Optional[PldaModel] = None


def write_stats(path, report: CovarianceReport, boxplot: Dict[str, FiveNumber],
                plda: Optional[PldaModel] = None):
    """Sections: [meta] [within] [between] [total] [avg_uncertainty] [boxplot]
    and, if a model is given, [plda] with rows ``mu``, ``between``, ``within``.
    """
    with open(path, "w") as f:
        f.write("[meta]\n")
        f.write(f"dim {report.dim}\nn_utts {report.n_utts}\nn_speakers {report.n_speakers}\n")
        for name in QUANTITIES:
            f.write(f"[{name}]\n{_fmt_vec(report.diag(name))}\n")
        f.write("[boxplot]\n")
        for name in QUANTITIES:
            f.write(f"{name} {_fmt_vec(boxplot[name].as_tuple())}\n")
        if plda is not None:
            f.write("[plda]\n")
            f.write(f"mu {_fmt_vec(plda.mu)}\nbetween {_fmt_vec(plda.b_diag)}\n"
                    f"within {_fmt_vec(plda.w_diag)}\n")


def read_stats(path) -> StatsFile:
    sections: Dict[str, List[Tuple[int, List[str]]]] = {}
    current = None
    for n, toks in _lines(path):
        if len(toks) == 1 and toks[0].startswith("[") and toks[0].endswith("]"):
            current = toks[0][1:-1]
            if current in sections:
                raise FormatError(path, n, f"duplicate section [{current}]")
            sections[current] = []
        elif current is None:
            raise FormatError(path, n, "data before first section header")
        else:
            sections[current].append((n, toks))

    def need(name):
        if name not in sections:
            raise FormatError(path, 0, f"missing section [{name}]")
        return sections[name]

    meta = {toks[0]: toks[1:] for _, toks in need("meta")}
    try:
        d = int(meta["dim"][0])
        n_utts = int(meta["n_utts"][0])
        n_spk = int(meta["n_speakers"][0])
    except (KeyError, IndexError, ValueError):
        raise FormatError(path, 0, "[meta] needs integer dim, n_utts, n_speakers") from None

    def vector(rows, name):
        if len(rows) != 1:
            raise FormatError(path, rows[0][0] if rows else 0, f"[{name}] must hold one row")
        n, toks = rows[0]
        v = _floats(toks, path, n)
        if v.size != d:
            raise FormatError(path, n, f"[{name}] has {v.size} values, expected {d}")
        return v

    diags = {name: vector(need(name), name) for name in QUANTITIES}
    report = CovarianceReport(
        within_diag=diags["within"], between_diag=diags["between"], total_diag=diags["total"],
        avg_uncertainty_diag=diags["avg_uncertainty"], n_utts=n_utts, n_speakers=n_spk,
    )
    boxplot = {}
    for n, toks in sections.get("boxplot", []):
        if len(toks) != 6:
            raise FormatError(path, n, "boxplot rows are '<name> min q1 median q3 max'")
        boxplot[toks[0]] = FiveNumber(*_floats(toks[1:], path, n).tolist())

    plda = None
    if "plda" in sections:
        rows = {toks[0]: (n, toks[1:]) for n, toks in sections["plda"]}
        try:
            vals = {k: vector([rows[k]], f"plda {k}") for k in ("mu", "between", "within")}
        except KeyError as err:
            raise FormatError(path, 0, f"[plda] missing row {err}") from None
        try:
            plda = PldaModel(vals["mu"], vals["between"], vals["within"])
        except UpcosError as err:
            raise FormatError(path, 0, f"[plda] {err}") from None
    return StatsFile(report, boxplot, plda)


def write_analysis_csv(path, rows):
    """rows: iterable of (id, duration_s, avg_uncertainty)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "duration_s", "avg_uncertainty"])
        for uid, dur, unc in rows:
            w.writerow([uid, fmt(dur), fmt(unc)])


def write_sweep_csv(path, thresholds, far, frr, dcf):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["threshold", "far", "frr", "dcf"])
        for row in zip(thresholds.tolist(), far.tolist(), frr.tolist(), dcf.tolist()):
            w.writerow([fmt(x) for x in row])


def write_histogram_csv(path, counts, edges):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1].tolist(), edges[1:].tolist(), counts.tolist()):
            w.writerow([fmt(lo), fmt(hi), int(c)])
