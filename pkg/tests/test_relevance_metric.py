"""
ErrScore / Score / ケース分類 / CA・RS 集計のテスト
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from errors import EmptyEvaluationError, InvalidParametersError, LengthMismatchError, MissingDistributionError
from models import CaseLabel, ContextKey, DistanceTriple, ProbabilityTriple, RsParams
from services.distribution import distribution_from_counts, uniform_distribution
from services.relevance_metric import (
    classification_accuracy,
    classify_case,
    distances,
    err_score,
    mean_score,
    relevance_score,
    relevance_score_at,
    rescore,
    rs_limit_alpha,
    rs_limit_beta,
    score_sample,
)
from tests.conftest import evaluation_with

PARAMS = RsParams(alpha=2.0, beta=1.0)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False, allow_infinity=False)
half = st.floats(min_value=0.0, max_value=0.5, allow_nan=False, allow_infinity=False)
weight = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False)


def triangle(d_hp: float, d_pa: float) -> DistanceTriple:
    return DistanceTriple(d_hp=d_hp, d_pa=d_pa, d_ha=abs(d_hp - d_pa))


# ========== 距離 ==========

@pytest.mark.parametrize(
    "probs, expected",
    [
        ((0.4, 0.4, 0.2), (0.0, 0.2, 0.2)),
        ((0.5, 0.5, 0.5), (0.0, 0.0, 0.0)),
        ((0.4, 0.2, 0.4), (0.2, 0.2, 0.0)),
    ],
)
def test_distances(probs, expected):
    d = distances(ProbabilityTriple(p_h=probs[0], p_p=probs[1], p_a=probs[2]))
    assert (d.d_hp, d.d_pa, d.d_ha) == pytest.approx(expected, abs=1e-15)


def test_probability_triple_rejects_p_above_mode():
    with pytest.raises(ValidationError):
        ProbabilityTriple(p_h=0.2, p_p=0.4, p_a=0.1)


# ========== ErrScore ==========

@pytest.mark.parametrize(
    "d_hp, d_pa, expected",
    [
        (0.2, 0.2, 0.2),
        (0.0, 0.0, 0.0),
        (0.0, 0.2, 0.2 / 3),
    ],
)
def test_err_score_examples(d_hp, d_pa, expected):
    assert err_score(triangle(d_hp, d_pa), PARAMS) == pytest.approx(expected, abs=1e-12)


def test_err_score_rejects_zero_weight_sum():
    with pytest.raises(ValidationError):
        RsParams(alpha=0.0, beta=0.0)
    # 検証を経ないパラメータも計算時に拒否する
    with pytest.raises(InvalidParametersError):
        err_score(triangle(0.1, 0.1), RsParams.model_construct(alpha=0.0, beta=0.0))
    with pytest.raises(ValidationError):
        RsParams(alpha=-1.0, beta=2.0)


def test_err_score_matches_literal_formula_on_fuzzed_inputs():
    rng = np.random.default_rng(20240601)
    for _ in range(10_000):
        d_hp, d_pa = rng.random(2)
        alpha, beta = rng.uniform(0.01, 10.0, size=2)
        expected = (alpha * d_hp + beta * d_pa) / (alpha + beta)
        actual = err_score(triangle(float(d_hp), float(d_pa)), RsParams(alpha=float(alpha), beta=float(beta)))
        assert abs(actual - expected) <= 1e-12


@given(d_hp=unit, d_pa=unit, alpha=weight, beta=weight)
@settings(max_examples=300)
def test_err_score_bounded(d_hp, d_pa, alpha, beta):
    value = err_score(triangle(d_hp, d_pa), RsParams(alpha=alpha, beta=beta))
    assert 0.0 <= value <= 1.0
    assert 0.0 <= (1.0 - value) * 100.0 <= 100.0


@pytest.mark.parametrize("c", [1e-3, 7.0, 1e3])
@given(d_hp=unit, d_pa=unit, alpha=weight, beta=weight)
@settings(max_examples=100)
def test_err_score_scale_invariant(c, d_hp, d_pa, alpha, beta):
    d = triangle(d_hp, d_pa)
    base = err_score(d, RsParams(alpha=alpha, beta=beta))
    scaled = err_score(d, RsParams(alpha=c * alpha, beta=c * beta))
    assert abs(base - scaled) <= 1e-12


def test_err_score_allows_single_zero_weight():
    d = triangle(0.3, 0.1)
    assert err_score(d, RsParams(alpha=0.0, beta=1.0)) == pytest.approx(0.1)
    assert err_score(d, RsParams(alpha=1.0, beta=0.0)) == pytest.approx(0.3)


# ========== ケース分類 ==========

@pytest.mark.parametrize(
    "predicted, actual, probs, expected",
    [
        ("LA", "LA", (0.4, 0.4, 0.4), CaseLabel.CASE1),
        ("LA", "LC", (0.4, 0.4, 0.2), CaseLabel.CASE2),
        ("LB", "LC", (0.5, 0.3, 0.2), CaseLabel.CASE3),
        ("LC", "LB", (0.5, 0.2, 0.3), CaseLabel.CASE4),
        ("LC", "LA", (0.4, 0.2, 0.4), CaseLabel.CASE5),
        ("LA", "LB", (0.4, 0.4, 0.4), CaseLabel.CASE_OTHER),
    ],
)
def test_classify_case(predicted, actual, probs, expected):
    triple = ProbabilityTriple(p_h=probs[0], p_p=probs[1], p_a=probs[2])
    assert classify_case(predicted, actual, triple) == expected


def test_classify_case_uses_tolerance():
    triple = ProbabilityTriple(p_h=0.4, p_p=0.4 - 1e-12, p_a=0.2)
    assert classify_case("LA", "LC", triple) == CaseLabel.CASE2
    assert classify_case("LA", "LC", triple, tolerance=0.0) == CaseLabel.CASE3


def test_case_descriptions():
    assert CaseLabel.CASE1.description == "HighlyRelevant"
    assert CaseLabel.CASE5.description == "Irrelevant"


@pytest.mark.parametrize("alpha, beta", [(2.0, 1.0), (1.0, 1.0), (1.0, 2.0)])
def test_case_consistency_on_probability_grid(alpha, beta):
    params = RsParams(alpha=alpha, beta=beta)
    grid = [i / 20 for i in range(21)]
    checked = {CaseLabel.CASE2: 0, CaseLabel.CASE5: 0}
    for p_h in grid:
        for p_p in grid:
            for p_a in grid:
                if p_p > p_h or p_a > p_h:
                    continue
                probs = ProbabilityTriple(p_h=p_h, p_p=p_p, p_a=p_a)
                case = classify_case("LP", "LA", probs)
                d = distances(probs)
                error = err_score(d, params)
                if case == CaseLabel.CASE2:
                    assert abs(error - beta * d.d_pa / (alpha + beta)) <= 1e-12
                    checked[case] += 1
                elif case == CaseLabel.CASE5:
                    assert abs(error - d.d_hp) <= 1e-12
                    checked[case] += 1
    assert all(count > 0 for count in checked.values())


# ========== サンプルスコア ==========

def test_score_sample_examples(d0):
    exact = score_sample("LB", "LB", d0, PARAMS)
    assert exact.score == 100.0
    assert exact.case == CaseLabel.CASE1

    tied = score_sample("LA", "LB", d0, PARAMS)
    assert tied.score == pytest.approx(100.0, abs=1e-9)
    assert tied.distances.d_hp == 0.0 and tied.distances.d_pa == 0.0

    irrelevant = score_sample("LC", "LA", d0, PARAMS)
    assert irrelevant.score == pytest.approx(80.0, abs=1e-9)
    assert irrelevant.case == CaseLabel.CASE5

    moderate = score_sample("LA", "LC", d0, PARAMS)
    assert moderate.score == pytest.approx(280.0 / 3, abs=1e-9)
    assert moderate.case == CaseLabel.CASE2


def test_score_sample_requires_distribution():
    with pytest.raises(MissingDistributionError):
        score_sample("LA", "LB", None, PARAMS)


def test_mode_tie_does_not_change_score(d0):
    # LA と LB が同率: 最頻値は辞書順で LA だが p_h は同じ値
    assert d0.mode == "LA"
    assert d0.mode_probability == d0.probability("LB")


def test_uniform_distribution_scores_mismatch_fully():
    uniform = uniform_distribution(ContextKey(reduced_values=("x",)), ["LA", "LB", "LC", "LD"])
    evaluation = score_sample("LA", "LD", uniform, PARAMS)
    assert evaluation.score == pytest.approx(100.0)
    assert evaluation.case == CaseLabel.CASE_OTHER


def test_unknown_label_has_zero_probability(d0):
    evaluation = score_sample("LZ", "LA", d0, PARAMS)
    assert evaluation.probs.p_p == 0.0
    assert evaluation.distances.d_hp == pytest.approx(0.4)


def test_rescore_matches_direct_scoring(d0):
    evaluation = score_sample("LC", "LB", d0, PARAMS)
    params = RsParams(alpha=1.0, beta=5.0)
    assert rescore(evaluation, params).score == pytest.approx(score_sample("LC", "LB", d0, params).score)
    matched = score_sample("LA", "LA", d0, PARAMS)
    assert rescore(matched, params) is matched


# ========== 集計 ==========

def test_relevance_score_all_matches(make_evaluation):
    assert relevance_score([make_evaluation(0.0, 0.0, matched=True)] * 5) == 100.0


@pytest.mark.parametrize(
    "scores, expected",
    [
        ([100.0, 75.0, 0.0, 50.0, 100.0], 65.0),
        ([100.0, 280.0 / 3, 80.0], 820.0 / 9),
    ],
)
def test_mean_score(scores, expected):
    assert mean_score(scores) == pytest.approx(expected, abs=1e-9)


def test_mean_score_rejects_empty():
    with pytest.raises(EmptyEvaluationError):
        mean_score([])
    with pytest.raises(EmptyEvaluationError):
        relevance_score([])


def test_classification_accuracy_partial_match():
    actual = ["LA", "LB", "LC", "LA", "LB"]
    predicted = ["LA", "LC", "LA", "LB", "LB"]
    assert classification_accuracy(predicted, actual) == 40.0


def test_classification_accuracy_extremes():
    labels = ["LA", "LB", "LC"]
    assert classification_accuracy(labels, labels) == 100.0
    assert classification_accuracy(["LB", "LC", "LA"], labels) == 0.0


def test_classification_accuracy_rejects_bad_input():
    with pytest.raises(LengthMismatchError):
        classification_accuracy(["LA"], ["LA", "LB"])
    with pytest.raises(EmptyEvaluationError):
        classification_accuracy([], [])


@given(
    counts=st.lists(st.integers(min_value=0, max_value=20), min_size=3, max_size=3).filter(lambda c: sum(c) > 0),
    pairs=st.lists(
        st.tuples(st.sampled_from(["LA", "LB", "LC"]), st.sampled_from(["LA", "LB", "LC"])), min_size=1, max_size=30
    ),
)
@settings(max_examples=200)
def test_rs_dominates_ca(counts, pairs):
    dist = distribution_from_counts(ContextKey(reduced_values=()), dict(zip(["LA", "LB", "LC"], counts)), ["LA", "LB", "LC"])
    evaluations = [score_sample(p, a, dist, PARAMS) for p, a in pairs]
    rs = relevance_score(evaluations)
    ca = classification_accuracy([p for p, _ in pairs], [a for _, a in pairs])
    assert rs >= ca - 1e-9
    if ca == 100.0:
        assert rs == 100.0


# ========== 極限 ==========

def test_limits_all_matches(make_evaluation):
    evaluations = [make_evaluation(0.0, 0.0, matched=True)] * 3
    assert rs_limit_alpha(evaluations) == 100.0
    assert rs_limit_beta(evaluations) == 100.0


@pytest.mark.parametrize(
    "d_hp, d_pa, alpha_limit, beta_limit",
    [
        (0.2, 0.2, 80.0, 80.0),
        (0.0, 0.2, 100.0, 80.0),
        (0.2, 0.0, 80.0, 100.0),
        (0.2, 0.1, 80.0, 90.0),
    ],
)
def test_limits_single_mismatch(make_evaluation, d_hp, d_pa, alpha_limit, beta_limit):
    evaluations = [make_evaluation(d_hp, d_pa)]
    assert rs_limit_alpha(evaluations) == pytest.approx(alpha_limit, abs=1e-9)
    assert rs_limit_beta(evaluations) == pytest.approx(beta_limit, abs=1e-9)


@given(st.lists(st.tuples(half, half, st.booleans()), min_size=1, max_size=20))
@settings(max_examples=200)
def test_limits_converge_and_bracket(rows):
    evaluations = [evaluation_with(d_hp, d_pa, matched=matched) for d_hp, d_pa, matched in rows]
    rs_alpha_inf = rs_limit_alpha(evaluations)
    rs_beta_inf = rs_limit_beta(evaluations)

    assert abs(relevance_score_at(evaluations, RsParams(alpha=1e6, beta=1.0)) - rs_alpha_inf) <= 1e-3
    assert abs(relevance_score_at(evaluations, RsParams(alpha=1.0, beta=1e6)) - rs_beta_inf) <= 1e-3

    low, high = min(rs_alpha_inf, rs_beta_inf), max(rs_alpha_inf, rs_beta_inf)
    for params in (RsParams(alpha=2, beta=1), RsParams(alpha=1, beta=1), RsParams(alpha=1, beta=2)):
        rs = relevance_score_at(evaluations, params)
        assert low - 1e-9 <= rs <= high + 1e-9


def test_relevance_score_at_agrees_with_stored_scores(make_evaluation):
    evaluations = [
        make_evaluation(0.3, 0.1),
        make_evaluation(0.0, 0.2),
        make_evaluation(0.0, 0.0, matched=True),
    ]
    assert relevance_score_at(evaluations, PARAMS) == pytest.approx(relevance_score(evaluations), abs=1e-12)
    expected = np.mean([(1 - (0.3 + 0.1) / 2) * 100, (1 - 0.1) * 100, 100.0])
    assert relevance_score_at(evaluations, RsParams(alpha=1, beta=1)) == pytest.approx(float(expected))
    assert math.isclose(
        relevance_score_at(evaluations, RsParams(alpha=1, beta=2)), float(np.mean([(1 - 0.5 / 3) * 100, (1 - 0.4 / 3) * 100, 100.0]))
    )
