"""
RelevanceScore の中核計算

ErrScore / Score、5 ケース分類、CA・RS の集計、α・β の極限値。
全て I/O を持たない純粋関数。
"""
from typing import Optional, Sequence

import numpy as np

from errors import EmptyEvaluationError, InvalidParametersError, LengthMismatchError, MissingDistributionError
from models import (
    CaseLabel,
    ConditionalDistribution,
    DistanceTriple,
    ProbabilityTriple,
    RsParams,
    SampleEvaluation,
)

DEFAULT_TOLERANCE = 1e-9


def distances(probs: ProbabilityTriple) -> DistanceTriple:
    """確率間の距離 d_HP, d_PA, d_HA"""
    return DistanceTriple(
        d_hp=abs(probs.p_h - probs.p_p),
        d_pa=abs(probs.p_p - probs.p_a),
        d_ha=abs(probs.p_h - probs.p_a),
    )


def err_score(distances: DistanceTriple, params: RsParams) -> float:
    """
    ErrScore = (α·d_HP + β·d_PA) / (α + β)

    Args:
        distances: サンプルの確率距離
        params: 重み (α, β)

    Returns:
        [0, 1] の誤差スコア
    """
    total = params.alpha + params.beta
    if not total > 0:
        raise InvalidParametersError(f"alpha + beta must be positive (alpha={params.alpha}, beta={params.beta})")
    value = (params.alpha * distances.d_hp + params.beta * distances.d_pa) / total
    return min(1.0, max(0.0, value))


def classify_case(
    predicted: str,
    actual: str,
    probs: ProbabilityTriple,
    tolerance: float = DEFAULT_TOLERANCE,
) -> CaseLabel:
    """
    予測の定性的な関連度ケースを判定

    確率の等値判定は絶対許容誤差 tolerance で行う。
    どのケースにも該当しない構成（p_P = p_A など）は CaseOther。
    """
    if predicted == actual:
        return CaseLabel.CASE1

    def equal(a: float, b: float) -> bool:
        return abs(a - b) <= tolerance

    def greater(a: float, b: float) -> bool:
        return a - b > tolerance

    p_h, p_p, p_a = probs.p_h, probs.p_p, probs.p_a
    if equal(p_h, p_p) and greater(p_p, p_a):
        return CaseLabel.CASE2
    if greater(p_h, p_p) and greater(p_p, p_a):
        return CaseLabel.CASE3
    if greater(p_h, p_a) and greater(p_a, p_p):
        return CaseLabel.CASE4
    if equal(p_h, p_a) and greater(p_a, p_p):
        return CaseLabel.CASE5
    return CaseLabel.CASE_OTHER


def probability_triple(predicted: str, actual: str, dist: ConditionalDistribution) -> ProbabilityTriple:
    """分布から P(O_H), P(O_P), P(O_A) を取り出す（未知ラベルは確率 0）"""
    return ProbabilityTriple(
        p_h=dist.mode_probability,
        p_p=dist.probability(predicted),
        p_a=dist.probability(actual),
    )


def score_sample(
    predicted: str,
    actual: str,
    dist: Optional[ConditionalDistribution],
    params: RsParams,
    tolerance: float = DEFAULT_TOLERANCE,
) -> SampleEvaluation:
    """
    1 サンプルの Score = (1 - ErrScore) × 100 を計算

    Args:
        predicted: 予測ラベル O_P
        actual: 実際のラベル O_A
        dist: サンプルのコンテキストの条件付き分布
        params: 重み (α, β)
        tolerance: ケース判定の許容誤差

    Returns:
        確率・距離・ケース・スコアを含む評価結果
    """
    if dist is None:
        raise MissingDistributionError(f"No distribution available for sample (predicted={predicted}, actual={actual})")

    probs = probability_triple(predicted, actual, dist)
    d = distances(probs)
    error = 0.0 if predicted == actual else err_score(d, params)
    return SampleEvaluation(
        predicted=predicted,
        actual=actual,
        probs=probs,
        distances=d,
        case=classify_case(predicted, actual, probs, tolerance),
        err_score=error,
        score=(1.0 - error) * 100.0,
    )


def rescore(evaluation: SampleEvaluation, params: RsParams) -> SampleEvaluation:
    """保持済みの距離から別の (α, β) でスコアを再計算"""
    if evaluation.matched:
        return evaluation
    error = err_score(evaluation.distances, params)
    return evaluation.model_copy(update={"err_score": error, "score": (1.0 - error) * 100.0})


def mean_score(scores: Sequence[float]) -> float:
    """スコア列の算術平均（numpy のペアワイズ加算）"""
    if len(scores) == 0:
        raise EmptyEvaluationError("Cannot aggregate an empty set of scores")
    return float(np.mean(np.asarray(scores, dtype=float)))


def relevance_score(evals: Sequence[SampleEvaluation]) -> float:
    """RS: サンプルごとの Score の平均"""
    return mean_score([evaluation.score for evaluation in evals])


def classification_accuracy(predicted: Sequence[str], actual: Sequence[str]) -> float:
    """CA: 完全一致の割合 × 100"""
    if len(predicted) != len(actual):
        raise LengthMismatchError(f"Predicted and actual sequences differ in length ({len(predicted)} vs {len(actual)})")
    if len(actual) == 0:
        raise EmptyEvaluationError("Cannot compute accuracy over an empty sequence")
    matches = sum(1 for p, a in zip(predicted, actual) if p == a)
    return 100.0 * matches / len(actual)


def _distance_arrays(evals: Sequence[SampleEvaluation]):
    if len(evals) == 0:
        raise EmptyEvaluationError("Cannot aggregate an empty evaluation set")
    d_hp = np.array([evaluation.distances.d_hp for evaluation in evals], dtype=float)
    d_pa = np.array([evaluation.distances.d_pa for evaluation in evals], dtype=float)
    matched = np.array([evaluation.matched for evaluation in evals], dtype=bool)
    return d_hp, d_pa, matched


def relevance_score_at(evals: Sequence[SampleEvaluation], params: RsParams) -> float:
    """保持済みの距離から任意の (α, β) における RS を計算"""
    total = params.alpha + params.beta
    if not total > 0:
        raise InvalidParametersError(f"alpha + beta must be positive (alpha={params.alpha}, beta={params.beta})")
    d_hp, d_pa, matched = _distance_arrays(evals)
    errors = np.clip((params.alpha * d_hp + params.beta * d_pa) / total, 0.0, 1.0)
    errors[matched] = 0.0
    return float(np.mean((1.0 - errors) * 100.0))


def rs_limit_alpha(evals: Sequence[SampleEvaluation]) -> float:
    """α→∞ の極限: 不一致サンプルは (1 - d_HP) × 100"""
    d_hp, _, matched = _distance_arrays(evals)
    return float(np.mean(np.where(matched, 100.0, (1.0 - d_hp) * 100.0)))


def rs_limit_beta(evals: Sequence[SampleEvaluation]) -> float:
    """β→∞ の極限: 不一致サンプルは (1 - d_PA) × 100"""
    _, d_pa, matched = _distance_arrays(evals)
    return float(np.mean(np.where(matched, 100.0, (1.0 - d_pa) * 100.0)))
