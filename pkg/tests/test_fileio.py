import numpy as np
import pytest

from upcos import fileio
from upcos.errors import FormatError
from upcos.plda import plda_fit
from upcos.propagation import UncertainEmbedding
from upcos.scoring import Trial, TrialScore
from upcos.stats import estimate_covariances, summarize_boxplot


def awkward_values(rng, n):
    # values whose shortest decimal form is long, plus subnormals and extremes
    v = rng.normal(size=n) * 10.0 ** rng.integers(-300, 300, n)
    v[:3] = [5e-324, 1.7976931348623157e308, 0.1 + 0.2]
    return v


class TestEmbeddings:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        embs = {}
        for i in range(20):
            phi = awkward_values(rng, 5)
            su = np.abs(awkward_values(rng, 5))
            embs[f"u{i}"] = UncertainEmbedding(f"u{i}", phi, su, None if i % 3 == 0 else rng.uniform(1, 60))
        path = tmp_path / "e.txt"
        fileio.write_embeddings(path, embs)
        back = fileio.read_embeddings(path)
        assert list(back) == list(embs)
        for k, e in embs.items():
            assert np.array_equal(back[k].phi, e.phi)
            assert np.array_equal(back[k].sigma_u_diag, e.sigma_u_diag)
            assert back[k].duration_s == e.duration_s

    def test_empty_collection(self, tmp_path):
        fileio.write_embeddings(tmp_path / "e.txt", {})
        assert fileio.read_embeddings(tmp_path / "e.txt") == {}

    @pytest.mark.parametrize("text, line", [
        ("", 0),
        ("BAD 1 1\n", 1),
        ("UPEMB1 2 1\nu - 1 2 3\n", 2),
        ("UPEMB1 1 2\nu - 1 0\nu - 1 0\n", 3),
        ("UPEMB1 1 1\nu - x 0\n", 2),
        ("UPEMB1 1 1\nu - 1 -1\n", 2),
        ("UPEMB1 1 2\nu - 1 0\n", 2),
    ])
    def test_malformed(self, tmp_path, text, line):
        path = tmp_path / "e.txt"
        path.write_text(text)
        with pytest.raises(FormatError) as err:
            fileio.read_embeddings(path)
        assert err.value.lineno == line


class TestTrialsAndScores:
    def test_trials_round_trip(self, tmp_path):
        trials = [Trial("a", "b", True), Trial("a", "c", False), Trial("c", "b")]
        fileio.write_trials(tmp_path / "t.txt", trials)
        assert fileio.read_trials(tmp_path / "t.txt") == trials

    def test_bad_label(self, tmp_path):
        (tmp_path / "t.txt").write_text("a b maybe\n")
        with pytest.raises(FormatError):
            fileio.read_trials(tmp_path / "t.txt")

    def test_scores_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        vals = awkward_values(rng, 10)
        scores = [TrialScore(f"e{i}", f"t{i}", float(v)) for i, v in enumerate(vals)]
        fileio.write_scores(tmp_path / "s.txt", scores)
        back = fileio.read_scores(tmp_path / "s.txt")
        assert back == [(s.enrol_id, s.test_id, s.score) for s in scores]

    def test_labels_round_trip(self, tmp_path):
        labels = {"u1": "s1", "u2": "s1", "u3": "s2"}
        fileio.write_labels(tmp_path / "l.txt", labels)
        assert fileio.read_labels(tmp_path / "l.txt") == labels


class TestStats:
    def test_round_trip_with_plda(self, tmp_path, small_corpus):
        report = estimate_covariances(small_corpus.embeddings, small_corpus.labels)
        box = summarize_boxplot(report)
        model = plda_fit(small_corpus.embeddings, small_corpus.labels)
        fileio.write_stats(tmp_path / "s.txt", report, box, model)
        back = fileio.read_stats(tmp_path / "s.txt")
        for name in ("within", "between", "total", "avg_uncertainty"):
            assert np.array_equal(back.report.diag(name), report.diag(name))
        assert (back.report.n_utts, back.report.n_speakers) == (report.n_utts, report.n_speakers)
        assert back.boxplot == box
        for k in ("mu", "b_diag", "w_diag"):
            assert np.array_equal(getattr(back.plda, k), getattr(model, k))

    def test_without_plda(self, tmp_path, small_corpus):
        report = estimate_covariances(small_corpus.embeddings, small_corpus.labels)
        fileio.write_stats(tmp_path / "s.txt", report, summarize_boxplot(report))
        assert fileio.read_stats(tmp_path / "s.txt").plda is None

    def test_missing_section(self, tmp_path):
        (tmp_path / "s.txt").write_text("[meta]\ndim 1\nn_utts 2\nn_speakers 1\n[within]\n1.0\n")
        with pytest.raises(FormatError):
            fileio.read_stats(tmp_path / "s.txt")
