import json
import random

import pytest

from m3.errors import SchemaError, UnextractablePredictionError
from m3.evaluation import (
    PredictionRecord,
    bleu4,
    classification_f1,
    closed_vqa_accuracy,
    green_score,
    load_predictions,
    normalize_answer,
    open_vqa_exact_match,
    rouge_1,
    rouge_l,
    tokenize,
)

from oracles import oracle_accuracy, oracle_bleu4, oracle_f1_from_labels, oracle_rouge_l

WORDS = ["the", "lungs", "are", "clear", "no", "effusion", "heart", "size", "normal", "mild"]


def random_sentence(rng, min_len=1, max_len=12):
    n = rng.randint(min_len, max_len)
    tokens = [rng.choice(WORDS) for _ in range(n)]
    if rng.random() < 0.4:
        tokens.append(rng.choice([".", ",", "!"]))
    return " ".join(tokens)


class TestNormalize:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("Yes.", "yes"),
            ("yeah", "yes"),
            ("No.", "no"),
            ("nope", "no"),
            ("  The   Heart ", "the heart"),
            ("What, me worry?", "what me worry"),
        ],
    )
    def test_normalization_table(self, raw, expected):
        assert normalize_answer(raw) == expected

    def test_tokenize_separates_punctuation(self):
        assert tokenize("No effusion, clear.") == ["no", "effusion", ",", "clear", "."]


class TestClosedVqaAccuracy:
    def make(self, pairs):
        return [
            PredictionRecord(id=str(i), task="vqa-closed", prediction=p, reference=r)
            for i, (p, r) in enumerate(pairs)
        ]

    def test_identical_is_one(self):
        records = self.make([("yes", "yes"), ("left lung", "left lung")])
        assert closed_vqa_accuracy(records) == 1.0

    def test_punctuated_yes_counts(self):
        records = self.make([("Yes.", "yes")])
        assert closed_vqa_accuracy(records) == 1.0

    def test_seven_of_ten(self):
        pairs = [("yes", "yes")] * 7 + [("no", "yes")] * 3
        records = self.make(pairs)
        # Brute-force count oracle.
        preds, refs = zip(*pairs)
        assert oracle_accuracy(list(preds), list(refs)) == 0.7
        assert closed_vqa_accuracy(records) == 0.7

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            closed_vqa_accuracy([])

    def test_wrong_task_rejected(self):
        record = PredictionRecord(id="x", task="report", prediction="a", reference="a")
        with pytest.raises(SchemaError):
            closed_vqa_accuracy([record])

    def test_open_exact_match_is_separate(self):
        records = [
            PredictionRecord(id="0", task="vqa-open", prediction="left upper lobe", reference="Left upper lobe."),
            PredictionRecord(id="1", task="vqa-open", prediction="right", reference="left"),
        ]
        assert open_vqa_exact_match(records) == 0.5


class TestBleu4:
    def test_identity_corpus_scores_100(self):
        corpus = ["the lungs are clear today", "no pleural effusion is seen"]
        assert bleu4(corpus, corpus).score == pytest.approx(100.0, abs=1e-9)

    def test_disjoint_corpus_scores_0(self):
        assert bleu4(["alpha beta gamma delta"], ["one two three four"]).score == 0.0

    def test_two_sentence_fixture_matches_hand_computation(self):
        candidates = ["the cat sat on the mat", "dogs run fast"]
        references = ["the cat is on the mat", "dogs run very fast"]
        # Hand-verified oracle computation (direct enumeration).
        expected = oracle_bleu4(candidates, references)
        got = bleu4(candidates, references)
        assert got.score == pytest.approx(expected, abs=1e-9)
        # Spot-check the pieces: cand 1 shares 5/6 unigrams, cand 2 shares 3/3.
        assert got.precisions[0] == pytest.approx((5 + 3) / (6 + 3), abs=1e-12)
        assert got.brevity_penalty < 1.0  # 9 candidate tokens vs 10 reference tokens

    def test_matches_oracle_on_randomized_corpora(self):
        rng = random.Random(1234)
        for _ in range(60):
            n = rng.randint(1, 20)
            candidates = [random_sentence(rng) for _ in range(n)]
            references = [random_sentence(rng) for _ in range(n)]
            assert bleu4(candidates, references).score == pytest.approx(
                oracle_bleu4(candidates, references), abs=1e-9
            )

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            bleu4([], [])

    def test_ragged_corpus_rejected(self):
        with pytest.raises(ValueError):
            bleu4(["a"], ["a", "b"])


class TestRouge:
    def test_identical_pair_scores_100(self):
        assert rouge_l(["a b c d"], ["a b c d"]) == pytest.approx(100.0, abs=1e-9)

    def test_abc_axc_fixture(self):
        # LCS("a b c", "a x c") = 2 -> P = R = 2/3 -> F = 2/3.
        score = rouge_l(["a b c"], ["a x c"])
        assert score == pytest.approx(200.0 / 3.0, abs=1e-9)

    def test_disjoint_scores_0(self):
        assert rouge_l(["a b c"], ["x y z"]) == 0.0

    def test_matches_oracle_on_randomized_corpora(self):
        rng = random.Random(99)
        for _ in range(60):
            n = rng.randint(1, 20)
            candidates = [random_sentence(rng) for _ in range(n)]
            references = [random_sentence(rng) for _ in range(n)]
            assert rouge_l(candidates, references) == pytest.approx(
                oracle_rouge_l(candidates, references), abs=1e-9
            )

    def test_rouge_1_identity_and_disjoint(self):
        assert rouge_1(["a b c"], ["c b a"]) == pytest.approx(100.0, abs=1e-9)
        assert rouge_1(["a b"], ["x y"]) == 0.0

    def test_scores_stay_in_range(self):
        rng = random.Random(7)
        for _ in range(30):
            candidates = [random_sentence(rng) for _ in range(rng.randint(1, 8))]
            references = [random_sentence(rng) for _ in range(len(candidates))]
            assert 0.0 <= rouge_l(candidates, references) <= 100.0
            assert 0.0 <= bleu4(candidates, references).score <= 100.0


CONDITIONS = ["Atelectasis", "Cardiomegaly", "Effusion"]


def prediction_text(labels):
    return "\n".join(f"{name}: {'yes' if labels[name] else 'no'}" for name in CONDITIONS)


def make_cls_record(idx, pred_labels, ref_labels):
    return PredictionRecord(
        id=f"c{idx}",
        task="classification",
        prediction=prediction_text(pred_labels),
        reference={name: ref_labels[name] for name in CONDITIONS},
    )


class TestClassificationF1:
    def test_perfect_predictions_score_100(self):
        rng = random.Random(5)
        rows = [{name: rng.random() < 0.5 for name in CONDITIONS} for _ in range(12)]
        # Guarantee every condition has at least one positive.
        for i, name in enumerate(CONDITIONS):
            rows[i][name] = True
        records = [make_cls_record(i, row, row) for i, row in enumerate(rows)]
        report = classification_f1(records, CONDITIONS)
        for score in report.condition_scores().values():
            assert score == pytest.approx(100.0, abs=1e-9)

    def test_formula_tp1_fp1_fn1(self):
        # One record per cell: tp, fp, fn for Atelectasis only.
        records = [
            make_cls_record(
                0,
                {"Atelectasis": True, "Cardiomegaly": False, "Effusion": False},
                {"Atelectasis": True, "Cardiomegaly": False, "Effusion": False},
            ),
            make_cls_record(
                1,
                {"Atelectasis": True, "Cardiomegaly": False, "Effusion": False},
                {"Atelectasis": False, "Cardiomegaly": False, "Effusion": False},
            ),
            make_cls_record(
                2,
                {"Atelectasis": False, "Cardiomegaly": False, "Effusion": False},
                {"Atelectasis": True, "Cardiomegaly": False, "Effusion": False},
            ),
        ]
        report = classification_f1(records, CONDITIONS)
        assert report.condition_scores()["Atelectasis"] == pytest.approx(50.0, abs=1e-9)

    def test_all_negative_degenerate_flagged(self):
        labels = {name: False for name in CONDITIONS}
        records = [make_cls_record(i, labels, labels) for i in range(4)]
        report = classification_f1(records, CONDITIONS)
        assert set(report.degenerate) == set(CONDITIONS)
        assert report.macro_f1 == 0.0

    def test_matches_oracle_on_randomized_label_sets(self):
        rng = random.Random(2024)
        for _ in range(50):
            n = rng.randint(1, 20)
            pred_rows = [{name: rng.random() < 0.5 for name in CONDITIONS} for _ in range(n)]
            ref_rows = [{name: rng.random() < 0.5 for name in CONDITIONS} for _ in range(n)]
            records = [make_cls_record(i, p, r) for i, (p, r) in enumerate(zip(pred_rows, ref_rows))]
            report = classification_f1(records, CONDITIONS)
            oracle_scores, oracle_macro = oracle_f1_from_labels(pred_rows, ref_rows, CONDITIONS)
            for name in CONDITIONS:
                assert report.condition_scores()[name] == pytest.approx(oracle_scores[name], abs=1e-9)
            assert report.macro_f1 == pytest.approx(oracle_macro, abs=1e-9)

    def test_structured_json_predictions_accepted(self):
        record = PredictionRecord(
            id="j0",
            task="classification",
            prediction={"Atelectasis": "yes", "Cardiomegaly": False, "Effusion": 1},
            reference={"Atelectasis": True, "Cardiomegaly": False, "Effusion": True},
        )
        report = classification_f1([record], CONDITIONS)
        assert report.condition_scores()["Effusion"] == pytest.approx(100.0)

    def test_unextractable_raises_with_ids(self):
        record = PredictionRecord(
            id="bad-1", task="classification", prediction="The image looks fine.", reference=[]
        )
        with pytest.raises(UnextractablePredictionError) as exc_info:
            classification_f1([record], CONDITIONS)
        assert exc_info.value.record_ids == ["bad-1"]

    def test_lenient_counts_missing_as_no(self):
        records = [
            PredictionRecord(
                id="bad-1", task="classification", prediction="no labels here", reference=["Atelectasis"]
            )
        ]
        report = classification_f1(records, CONDITIONS, lenient=True)
        assert report.lenient_ids == ["bad-1"]
        assert report.per_condition["Atelectasis"].fn == 1

    def test_reference_as_positive_list(self):
        record = PredictionRecord(
            id="r0",
            task="classification",
            prediction=prediction_text({"Atelectasis": True, "Cardiomegaly": False, "Effusion": False}),
            reference=["Atelectasis"],
        )
        report = classification_f1([record], CONDITIONS)
        assert report.per_condition["Atelectasis"].tp == 1


class TestGreen:
    def test_no_judge_returns_none(self):
        assert green_score(["a"], ["b"], judge=None) is None

    def test_constant_judge(self):
        class Constant:
            def score(self, candidate, reference):
                return 0.5

        assert green_score(["a", "b"], ["c", "d"], judge=Constant()) == pytest.approx(50.0)

    def test_echo_fixture_mean(self):
        fixture = {("a", "x"): 0.25, ("b", "y"): 0.75, ("c", "z"): 0.5}

        class Echo:
            def score(self, candidate, reference):
                return fixture[(candidate, reference)]

        expected = 100.0 * sum(fixture.values()) / len(fixture)
        got = green_score(["a", "b", "c"], ["x", "y", "z"], judge=Echo())
        assert got == pytest.approx(expected)


def test_load_predictions_round_trip(tmp_path):
    path = tmp_path / "preds.jsonl"
    rows = [
        {"id": "0", "task": "vqa-closed", "prediction": "yes", "reference": "yes"},
        {"id": "1", "task": "classification", "prediction": "Atelectasis: yes", "reference": ["Atelectasis"]},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    records = load_predictions(path)
    assert [r.id for r in records] == ["0", "1"]
    assert records[1].reference == ["Atelectasis"]


def test_load_predictions_rejects_bad_rows(tmp_path):
    path = tmp_path / "preds.jsonl"
    path.write_text('{"id": "0", "task": "nope", "prediction": "x", "reference": "y"}\n')
    with pytest.raises(SchemaError):
        load_predictions(path)
