import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from m3.data import SentencePool, build_sentence_pool, normalize_report, token_f1

POOL = SentencePool(
    sentences=(
        "The cardiac silhouette is normal in size",
        "The lungs are low in volume",
        "No pleural effusions",
        "No pulmonary edema",
        "There is mild pulmonary vascular congestion",
    )
)


class TestTokenF1:
    def test_hand_computed_overlap(self):
        # tokens: 5 vs 6, overlap 5 -> 2*5/(5+6)
        score = token_f1("Lungs are low in volume.", "The lungs are low in volume.")
        assert score == pytest.approx(10 / 11, abs=1e-12)

    def test_identical_sentences(self):
        assert token_f1("No pleural effusions.", "No pleural effusions") == 1.0

    def test_disjoint_sentences(self):
        assert token_f1("alpha beta", "gamma delta") == 0.0

    def test_empty_side_scores_zero(self):
        assert token_f1("", "anything") == 0.0


class TestNormalizeReport:
    def test_exact_match_unchanged(self):
        assert normalize_report("No pleural effusions.", POOL) == "No pleural effusions."

    def test_empty_report(self):
        assert normalize_report("", POOL) == ""

    def test_near_match_substituted(self):
        out = normalize_report("Lungs are low in volume.", POOL, threshold=0.6)
        assert out == "The lungs are low in volume."

    def test_below_threshold_passes_through(self):
        out = normalize_report("Patient has a fractured rib.", POOL, threshold=0.6)
        assert out == "Patient has a fractured rib."

    def test_multi_sentence_order_preserved(self):
        report = "Lungs are low in volume. Patient is intubated. No pleural effusion."
        out = normalize_report(report, POOL, threshold=0.6)
        assert out == (
            "The lungs are low in volume. Patient is intubated. No pleural effusions."
        )

    def test_custom_rewriter_applies_to_unmatched_only(self):
        out = normalize_report(
            "No pleural effusions. totally novel words here.",
            POOL,
            rewriter=str.upper,
            threshold=0.6,
        )
        assert out == "No pleural effusions. TOTALLY NOVEL WORDS HERE."

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.text(alphabet="abcdefg LNV", min_size=1, max_size=30).map(str.strip).filter(bool),
            max_size=5,
        )
    )
    def test_idempotent_with_identity_rewriter(self, sentences):
        report = ". ".join(sentences)
        once = normalize_report(report, POOL)
        twice = normalize_report(once, POOL)
        assert once == twice


class TestBuildSentencePool:
    CORPUS = [
        "No pleural effusions. The heart is enlarged.",
        "No pleural effusions. No pulmonary edema.",
        "No  pleural   effusions. Lines and tubes are unchanged.",
        "No pleural effusions! The heart is enlarged.",
        "No pleural effusions. Something unique.",
    ]

    def count_oracle(self, normalized_sentence):
        total = 0
        for report in self.CORPUS:
            for chunk in report.replace("!", ".").replace("?", ".").split("."):
                if " ".join(chunk.split()) == normalized_sentence:
                    total += 1
        return total

    def test_frequent_sentence_included(self):
        pool = build_sentence_pool(self.CORPUS, min_count=3)
        assert "No pleural effusions" in pool.sentences
        assert self.count_oracle("No pleural effusions") == 5

    def test_min_count_above_everything_gives_empty_pool(self):
        pool = build_sentence_pool(self.CORPUS, min_count=10)
        assert pool.sentences == ()

    def test_whitespace_variants_count_once(self):
        pool = build_sentence_pool(self.CORPUS, min_count=5)
        # The whitespace variant in report 3 counts toward the same key.
        assert pool.sentences == ("No pleural effusions",)

    def test_ordering_by_count_then_lexicographic(self):
        corpus = ["b b. a a. c c.", "b b. a a. c c.", "b b."]
        pool = build_sentence_pool(corpus, min_count=2)
        assert pool.sentences == ("b b", "a a", "c c")

    def test_pool_save_load_round_trip(self, tmp_path):
        pool = build_sentence_pool(self.CORPUS, min_count=2)
        path = tmp_path / "sentence-pool.txt"
        pool.save(path)
        assert SentencePool.load(path) == pool


def test_pool_rejects_duplicates_after_ws_normalization():
    with pytest.raises(ValueError):
        SentencePool(sentences=("No pleural effusions", "No  pleural effusions"))
