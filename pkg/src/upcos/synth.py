"""Seeded synthetic corpus: speakers, frame sequences, embeddings and trials.

Generative model per utterance ``u`` of speaker ``s`` (latent dim ``d_z``)::

    m_s   ~ N(0, between_var I)                 speaker mean
    c_u   ~ N(0, within_var I)                  session offset
    h_u   = exp(heteroscedasticity * N(0, 1))   per-utterance noise scale
    T_u   = round(duration_u * frames_per_second), duration_u ~ U(range)
    z_t   = m_s + c_u + N(0, frame_noise_var * h_u I),  t = 1..T_u

Frames carry the precision ``precision_mismatch / (frame_noise_var * h_u)``,
which is the true precision when the mismatch factor is 1.  Frames are pooled
against the prior ``N(0, (between_var + within_var) I)`` and propagated
through identity batch norm and a random FC layer with entries
``N(0, embedding_scale^2 / d_z)`` (``embedding_scale`` defaults to sqrt(d)) and zero bias.

Random streams: everything derives from ``numpy.random.SeedSequence(seed)``
through fixed spawn keys, each driving a PCG64 generator:

    (0,)                  FC layer weights
    (1, s)                mean of speaker ``s``
    (2, s, u)             utterance ``u`` of speaker ``s``
    (3,)                  trial sampling (seed given to generate_trials)

so speakers can be generated in any order or in parallel with identical
output.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, SamplingError
from .pooling import GaussianPrior, pool_arrays
from .propagation import AffineLayer, BatchNormStats, UncertainEmbedding, propagate
from .scoring import Trial, resolve_workers


@dataclass(frozen=True)
class SynthConfig:
    d_z: int = 32
    d: int = 16
    n_speakers: int = 50
    utts_per_speaker: int = 10
    duration_range_s: Tuple[float, float] = (2.0, 60.0)
    frames_per_second: float = 10.0
    between_var: float = 1.0
    within_var: float = 0.2
    frame_noise_var: float = 150.0
    heteroscedasticity: float = 0.5
    embedding_scale: Optional[float] = None
    precision_mismatch: float = 1.0
    seed: int = 42

    def __post_init__(self):
        dr = tuple(float(x) for x in self.duration_range_s)
        object.__setattr__(self, "duration_range_s", dr)
        self.validate()

    def validate(self):
        for name in ("d_z", "d", "n_speakers", "utts_per_speaker"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v}")
        lo, hi = self.duration_range_s
        if not (0 < lo <= hi and np.isfinite(hi)):
            raise ConfigurationError(f"invalid duration range {self.duration_range_s}")
        for name in ("frames_per_second", "between_var", "within_var", "frame_noise_var",
                     "weight_scale", "precision_mismatch"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be > 0, got {v}")
        if not (np.isfinite(self.heteroscedasticity) and self.heteroscedasticity >= 0):
            raise ConfigurationError("heteroscedasticity must be >= 0")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigurationError("seed must fit in 64 bits")

    @property
    def weight_scale(self):
        """FC weight scale; defaults to sqrt(d) so speaker variance per dim is ~d."""
        return float(np.sqrt(self.d)) if self.embedding_scale is None else float(self.embedding_scale)

    @classmethod
    def full_scale(cls, **overrides):
        """192-dimensional embeddings, as used by typical x-vector systems."""
        return cls(**{"d_z": 256, "d": 192, **overrides})

    @classmethod
    def from_dict(cls, data: Mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as err:
            if isinstance(err, ConfigurationError):
                raise
            raise ConfigurationError(str(err)) from err

    def to_dict(self):
        d = asdict(self)
        d["duration_range_s"] = list(self.duration_range_s)
        return d

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class Corpus:
    embeddings: Dict[str, UncertainEmbedding]
    labels: Dict[str, str]
    config: SynthConfig

    @property
    def durations(self):
        return {k: e.duration_s for k, e in self.embeddings.items()}


def _rng(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def speaker_id(s):
    return f"spk{s:05d}"


def utt_id(s, u):
    return f"{speaker_id(s)}-u{u:03d}"


def make_layer(cfg: SynthConfig) -> AffineLayer:
    rng = _rng(cfg.seed, 0)
    W = rng.standard_normal((cfg.d, cfg.d_z)) * (cfg.weight_scale / np.sqrt(cfg.d_z))
    return AffineLayer(W, np.zeros(cfg.d))


def make_prior(cfg: SynthConfig) -> GaussianPrior:
    return GaussianPrior(np.zeros(cfg.d_z),
                         np.full(cfg.d_z, 1.0 / (cfg.between_var + cfg.within_var)))


def _speaker(cfg, s, prior, bn, layer):
    mean = _rng(cfg.seed, 1, s).normal(0.0, np.sqrt(cfg.between_var), cfg.d_z)
    lo, hi = cfg.duration_range_s
    out = []
    for u in range(cfg.utts_per_speaker):
        rng = _rng(cfg.seed, 2, s, u)
        duration = float(rng.uniform(lo, hi))
        n_frames = max(1, int(round(duration * cfg.frames_per_second)))
        session = rng.normal(0.0, np.sqrt(cfg.within_var), cfg.d_z)
        noise_var = cfg.frame_noise_var * float(np.exp(cfg.heteroscedasticity * rng.standard_normal()))
        z = rng.standard_normal((n_frames, cfg.d_z))
        z *= np.sqrt(noise_var)
        z += mean + session
        prec = np.full(cfg.d_z, cfg.precision_mismatch / noise_var)
        post = pool_arrays(z, prec, prior)
        out.append(propagate(post, bn, layer, id=utt_id(s, u), duration_s=duration))
    return out


def generate_corpus(cfg: SynthConfig, workers=None) -> Corpus:
    """Generate embeddings with uncertainty, speaker labels and durations.

    Output is ordered by speaker then utterance index and is bitwise
    reproducible for a given config, whatever the number of workers.
    """
    cfg.validate()
    prior = make_prior(cfg)
    layer = make_layer(cfg)
    bn = BatchNormStats.identity(cfg.d_z)
    n_workers = resolve_workers(workers)
    job = lambda s: _speaker(cfg, s, prior, bn, layer)  # noqa: E731
    if n_workers == 1:
        per_spk = [job(s) for s in range(cfg.n_speakers)]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            per_spk = list(pool.map(job, range(cfg.n_speakers)))
    embeddings, labels = {}, {}
    for s, utts in enumerate(per_spk):
        for e in utts:
            embeddings[e.id] = e
            labels[e.id] = speaker_id(s)
    return Corpus(embeddings, labels, cfg)


def _group(labels: Mapping[str, str]):
    ids = list(labels)
    spk = [labels[i] for i in ids]
    order = sorted(range(len(ids)), key=lambda i: (spk[i], i))
    pos = np.empty(len(ids), dtype=np.int64)
    pos[order] = np.arange(len(ids))
    _, first, counts = np.unique([spk[i] for i in order], return_index=True, return_counts=True)
    # start/size of each utterance's speaker block in sorted order
    block = np.repeat(np.arange(first.size), counts)
    start = np.empty(len(ids), dtype=np.int64)
    size = np.empty(len(ids), dtype=np.int64)
    start[order] = first[block]
    size[order] = counts[block]
    return ids, np.asarray(order), pos, start, size


def pair_counts(labels: Mapping[str, str]):
    """Number of distinct ordered (target, nontarget) pairs available."""
    _, _, _, _, size = _group(labels)
    n = size.size
    return int((size - 1).sum()), int((n - size).sum())


def _choose(rng, total, n, what):
    if n > total:
        raise SamplingError(f"requested {n} {what} trials but only {total} distinct pairs exist")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(total, size=n, replace=False))


def generate_trials(labels: Mapping[str, str], n_target: int, n_nontarget: int,
                    seed: int) -> List[Trial]:
    """Sample distinct ordered (enrol, test) pairs without self-pairs.

    Target pairs share a speaker, nontarget pairs do not.  Targets come first,
    each block ordered by enrolment utterance.
    """
    if n_target < 0 or n_nontarget < 0:
        raise SamplingError("trial counts must be >= 0")
    ids, order, pos, start, size = _group(labels)
    n = len(ids)
    rng = _rng(seed, 3)
    trials = []

    # enrol i has size[i]-1 target partners and n-size[i] nontarget partners
    for n_req, per, target in ((n_target, size - 1, True), (n_nontarget, n - size, False)):
        cum = np.concatenate([[0], np.cumsum(per)])
        flat = _choose(rng, int(cum[-1]), n_req, "target" if target else "nontarget")
        enrol = np.searchsorted(cum, flat, side="right") - 1
        off = flat - cum[enrol]
        if target:
            # skip the enrol utterance itself inside its speaker block
            own = pos[enrol] - start[enrol]
            p = start[enrol] + off + (off >= own)
        else:
            # skip the enrol speaker's block
            p = off + size[enrol] * (off >= start[enrol])
        test = order[p]
        trials.extend(Trial(ids[e], ids[t], target) for e, t in zip(enrol.tolist(), test.tolist()))
    return trials
