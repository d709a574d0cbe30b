"""Acceptance criteria, one test (or small group) per criterion.

A per-criterion PASS/FAIL summary is printed at the end of the run.
"""

import json
import math
import os
import time

import numpy as np
import pytest

import directional
from oracles import (
    brute_force_eer,
    brute_force_min_dcf,
    dense_propagation,
    plda_quadrature,
    pool_oracle,
)
from pipeline import full_pipeline, run_ok
from upcos import (
    AffineLayer,
    BatchNormStats,
    GaussianPrior,
    PldaModel,
    PooledPosterior,
    SynthConfig,
    compute_eer,
    compute_min_dcf,
    generate_corpus,
    posterior_pool,
    propagate,
)
from upcos import fileio
from upcos.metrics import avg_uncertainty_scalar, pearson
from upcos.plda import plda_score_rows
from upcos.pooling import FramePosterior, pool_arrays
from upcos.propagation import UncertainEmbedding
from upcos.scoring import Trial, cosine_rows, mahalanobis_length, score_trials, up_cos_rows
from upcos.stats import estimate_covariances
from upcos.synth import generate_trials, pair_counts

FIXTURE = os.path.join(os.path.dirname(__file__), "fixtures", "table2_directional.json")
UP_VARIANTS = ("up1", "up2", "up3", "up4")


def criterion(num, title):
    return pytest.mark.criterion(num, title)


def default_trials(corpus):
    avail_t, avail_n = pair_counts(corpus.labels)
    return generate_trials(corpus.labels, min(1000, avail_t), min(1000, avail_n), corpus.config.seed)


def alpha_products(corpus, variant):
    tot = estimate_covariances(corpus.embeddings, corpus.labels).total_diag
    scores = score_trials(default_trials(corpus), corpus.embeddings, variant, tot)
    return np.array([s.alpha_e * s.alpha_t for s in scores])


def duration_correlation(corpus):
    embs = list(corpus.embeddings.values())
    return pearson([avg_uncertainty_scalar(e) for e in embs], [e.duration_s for e in embs])


@criterion(1, "decomposition identity |s - a_e a_t cos| <= 1e-9")
@pytest.mark.parametrize("d", [16, 192])
def test_ac01_decomposition(d):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1000 + d)
    n = 10000
    pe, pt = rng.normal(size=(n, d)), rng.normal(size=(n, d))
    se, st = rng.gamma(1.0, 2.0, (n, d)), rng.gamma(1.0, 2.0, (n, d))
    tot = rng.uniform(0.5, 3.0, d)
    cos = cosine_rows(pe, pt)
    worst = 0.0
    for v in UP_VARIANTS:
        s, ae, at = up_cos_rows(pe, se, pt, st, v, tot)
        worst = max(worst, float(np.max(np.abs(s - ae * at * cos))))
    elapsed = time.perf_counter() - t0
    print(f"AC01 d={d} max_abs_err={worst:.3e} time={elapsed:.2f}s")
    assert worst <= 1e-9
    assert elapsed < 5.0


@criterion(2, "zero-uncertainty UP-Cos 1/3 equals cosine")
def test_ac02_zero_uncertainty_numeric():
    rng = np.random.default_rng(2)
    pe, pt = rng.normal(size=(1000, 16)), rng.normal(size=(1000, 16))
    zero = np.zeros((1000, 16))
    cos = cosine_rows(pe, pt)
    for v in ("up1", "up3"):
        s, _, _ = up_cos_rows(pe, zero, pt, zero, v)
        err = float(np.max(np.abs(s - cos)))
        print(f"AC02 {v} max_abs_err={err:.3e}")
        assert err <= 1e-12


@criterion(2, "zero-uncertainty UP-Cos 1/3 equals cosine")
def test_ac02_zero_uncertainty_cli(tmp_path):
    rng = np.random.default_rng(3)
    embs = {f"u{i}": UncertainEmbedding(f"u{i}", rng.normal(size=16), np.zeros(16)) for i in range(40)}
    fileio.write_embeddings(tmp_path / "e.txt", embs)
    ids = list(embs)
    fileio.write_trials(tmp_path / "t.txt", [Trial(a, b) for a in ids for b in ids])
    for v in ("cos", "up1", "up3"):
        run_ok(["score", "--enrol", tmp_path / "e.txt", "--trials", tmp_path / "t.txt",
                "--variant", v, "--out", tmp_path / f"{v}.txt"])
    ref = (tmp_path / "cos.txt").read_bytes()
    assert (tmp_path / "up1.txt").read_bytes() == ref
    assert (tmp_path / "up3.txt").read_bytes() == ref


@criterion(3, "Mahalanobis length with identity covariance equals Euclidean norm")
def test_ac03_mahalanobis_identity():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 200))
        x = rng.normal(size=d) * 10.0 ** rng.uniform(-3, 3)
        ref = math.sqrt(math.fsum(v * v for v in x))
        worst = max(worst, abs(mahalanobis_length(x, np.ones(d)) - ref) / ref)
    print(f"AC03 max_rel_err={worst:.3e}")
    assert worst <= 1e-12


@criterion(4, "EER and minDCF equal a brute-force threshold oracle")
def test_ac04_metric_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 1001))
        nt = int(rng.integers(1, n))
        dec = int(rng.integers(0, 4))
        tar = np.round(rng.normal(1.0, 1.0, nt), dec)
        non = np.round(rng.normal(0.0, 1.0, n - nt), dec)
        assert compute_eer(tar, non)[0] == brute_force_eer(tar, non)
        for p in (0.01, 0.05, 0.5):
            assert compute_min_dcf(tar, non, p)[0] == brute_force_min_dcf(tar, non, p, 1.0, 1.0)
    elapsed = time.perf_counter() - t0
    print(f"AC04 time={elapsed:.2f}s")
    assert elapsed < 10.0


@criterion(5, "duration vs uncertainty correlation")
def test_ac05_duration_correlation():
    t0 = time.perf_counter()
    r_default = duration_correlation(generate_corpus(SynthConfig(seed=42)))
    r_honest = duration_correlation(generate_corpus(
        SynthConfig(seed=42, heteroscedasticity=0.0, precision_mismatch=1.0)))
    elapsed = time.perf_counter() - t0
    print(f"AC05 pearson default={r_default:.4f} honest_uniform={r_honest:.4f} time={elapsed:.2f}s")
    assert r_default <= -0.5
    assert r_honest <= -0.9
    assert elapsed < 30.0


@criterion(6, "between > within medians; uncertainty and within ranges overlap")
def test_ac06_covariance_ordering(default_corpus):
    r = estimate_covariances(default_corpus.embeddings, default_corpus.labels)
    u, w, b = r.avg_uncertainty_diag, r.within_diag, r.between_diag
    print(f"AC06 median between={np.median(b):.4f} within={np.median(w):.4f} "
          f"uncertainty=[{u.min():.4f}, {u.max():.4f}] within=[{w.min():.4f}, {w.max():.4f}]")
    assert np.median(b) > np.median(w)
    assert max(u.min(), w.min()) <= min(u.max(), w.max())


@criterion(7, "UP-Cos 1 beats cosine on >= 4 of 5 synthetic seeds")
@pytest.mark.slow
def test_ac07_directional():
    t0 = time.perf_counter()
    with open(FIXTURE) as f:
        expected = json.load(f)
    wins_eer = wins_dcf = 0
    for seed in directional.SEEDS:
        got = directional.run_seed(seed)
        exp = expected[str(seed)]
        for v in ("cos", "up1"):
            for k in ("eer", "min_dcf"):
                assert got[v][k] == pytest.approx(exp[v][k], abs=1e-12)
        wins_eer += got["up1"]["eer"] < got["cos"]["eer"]
        wins_dcf += got["up1"]["min_dcf"] < got["cos"]["min_dcf"]
        print(f"AC07 seed={seed} cos eer={got['cos']['eer']:.4f} dcf={got['cos']['min_dcf']:.4f} "
              f"up1 eer={got['up1']['eer']:.4f} dcf={got['up1']['min_dcf']:.4f}")
    elapsed = time.perf_counter() - t0
    print(f"AC07 eer wins={wins_eer}/5 dcf wins={wins_dcf}/5 time={elapsed:.1f}s")
    assert wins_eer >= 4
    assert wins_dcf >= 4
    assert elapsed < 120.0


@criterion(8, "posterior pooling matches the closed form; no frames gives the prior")
def test_ac08_pooling():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(1000):
        d, T = int(rng.integers(1, 9)), int(rng.integers(1, 40))
        z = rng.normal(size=(T, d)) * rng.uniform(0.1, 10)
        L = rng.uniform(0, 3, (T, d))
        m, pr = rng.normal(size=d), rng.uniform(0.1, 2, d)
        p = posterior_pool([FramePosterior(a, b) for a, b in zip(z, L)], GaussianPrior(m, pr))
        mean, prec, _ = pool_oracle(z, L, m, pr)
        rel = max(np.max(np.abs(p.mean - mean) / np.abs(mean)),
                  np.max(np.abs(p.prec_diag - prec) / prec))
        worst = max(worst, float(rel))
    print(f"AC08 max_rel_err={worst:.3e}")
    assert worst <= 1e-12

    prior = GaussianPrior(rng.normal(size=5), rng.uniform(0.1, 2, 5))
    for p in (posterior_pool([], prior), pool_arrays(np.empty((0, 5)), np.ones(5), prior)):
        assert np.array_equal(p.mean, prior.mean)
        assert np.array_equal(p.prec_diag, prior.prec_diag)


@criterion(9, "diagonal propagation matches the dense oracle; outputs nonnegative")
@pytest.mark.parametrize("shape", [(8, 8), (64, 16), (16, 64)])
def test_ac09_propagation(shape):
    rng = np.random.default_rng(sum(shape))
    d_out, d_in = shape
    worst = 0.0
    for _ in range(200):
        W = rng.normal(size=shape)
        p = PooledPosterior(rng.normal(size=d_in), rng.uniform(0.05, 20, d_in))
        e = propagate(p, BatchNormStats.identity(d_in), AffineLayer(W, rng.normal(size=d_out)))
        dense, _ = dense_propagation(W, 1.0 / p.prec_diag)
        assert np.all(e.sigma_u_diag >= 0)
        worst = max(worst, float(np.max(np.abs(e.sigma_u_diag - dense) / dense)))
    print(f"AC09 W={d_out}x{d_in} max_rel_err={worst:.3e}")
    assert worst <= 1e-12


@criterion(10, "PLDA matches quadrature; zero-uncertainty UP-PLDA equals PLDA")
def test_ac10_plda():
    rng = np.random.default_rng(10)
    worst = 0.0
    for d in (1, 2):
        for _ in range(50):
            mu = rng.normal(size=d)
            b, w = rng.uniform(0.1, 4, d), rng.uniform(0.05, 3, d)
            su_e, su_t = rng.uniform(0, 3, d), rng.uniform(0, 3, d)
            xe, xt = mu + rng.normal(size=d) * 2, mu + rng.normal(size=d) * 2
            m = PldaModel(mu, b, w)
            base = plda_score_rows(xe[None], su_e[None], xt[None], su_t[None], m, False)[0]
            up = plda_score_rows(xe[None], su_e[None], xt[None], su_t[None], m, True)[0]
            worst = max(worst, abs(base - plda_quadrature(xe, xt, mu, b, w, w)),
                        abs(up - plda_quadrature(xe, xt, mu, b, w + su_e, w + su_t)))
    print(f"AC10 max_abs_err_vs_quadrature={worst:.3e}")
    assert worst <= 1e-6

    mu, b, w = rng.normal(size=16), rng.uniform(0.1, 4, 16), rng.uniform(0.05, 3, 16)
    m = PldaModel(mu, b, w)
    pe, pt, z = rng.normal(size=(1000, 16)), rng.normal(size=(1000, 16)), np.zeros((1000, 16))
    diff = np.abs(plda_score_rows(pe, z, pt, z, m, True) - plda_score_rows(pe, z, pt, z, m, False))
    assert float(diff.max()) <= 1e-12


@criterion(11, "CLI outputs byte-identical across 1/4/8 threads and reruns")
def test_ac11_determinism(tmp_path):
    ref = full_pipeline(tmp_path / "run1", 1, speakers=12, utts=5)
    assert full_pipeline(tmp_path / "run2", 1, speakers=12, utts=5) == ref
    for threads in (4, 8):
        got = full_pipeline(tmp_path / f"threads{threads}", threads, speakers=12, utts=5)
        assert got.keys() == ref.keys()
        diff = [k for k in ref if got[k] != ref[k]]
        assert not diff, f"outputs differ with {threads} threads: {diff}"


@criterion(12, "alpha products <= 1 for variants 1/3 and straddle 1 for variants 2/4")
def test_ac12_alpha_products(default_corpus):
    prods = {v: alpha_products(default_corpus, v) for v in UP_VARIANTS}
    for v, p in prods.items():
        print(f"AC12 {v} alpha product range [{p.min():.4f}, {p.max():.4f}]")
    for v in ("up2", "up4"):
        assert prods[v].min() < 1.0 < prods[v].max()
    for v in ("up1", "up3"):
        assert np.all(prods[v] <= 1.0)
