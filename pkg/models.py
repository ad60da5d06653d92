from enum import Enum
from pathlib import Path
from typing import Annotated, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# 浮動小数点の丸め誤差に対する余裕
_SLACK = 1e-12

OutcomeLabel = Annotated[str, Field(min_length=1)]
Probability = Annotated[float, Field(ge=0.0, le=1.0)]


class CaseLabel(str, Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    CASE4 = "Case4"
    CASE5 = "Case5"
    CASE_OTHER = "CaseOther"

    @property
    def description(self) -> str:
        return CASE_DESCRIPTIONS[self]


CASE_DESCRIPTIONS = {
    CaseLabel.CASE1: "HighlyRelevant",
    CaseLabel.CASE2: "ModeratelyRelevant",
    CaseLabel.CASE3: "Relevant",
    CaseLabel.CASE4: "LessRelevant",
    CaseLabel.CASE5: "Irrelevant",
    CaseLabel.CASE_OTHER: "Unclassified",
}


class ProbabilitySource(str, Enum):
    FULL = "full"
    TRAIN = "train"


class UnseenPolicy(str, Enum):
    ERROR = "error"
    UNIFORM = "uniform"
    MARGINAL = "marginal"


class PredictorKind(str, Enum):
    MOST_PROBABLE = "most-probable"
    UNIFORM_RANDOM = "uniform-random"
    MARGINAL_RANDOM = "marginal-random"
    ONE_RULE = "one-rule"
    ZERO_RULE = "zero-rule"


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


# ========== 指標 ==========

class RsParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=2.0, ge=0.0, allow_inf_nan=False)  # d_HP の重み
    beta: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)  # d_PA の重み

    @model_validator(mode="after")
    def _check_positive_sum(self):
        if not self.alpha + self.beta > 0:
            raise ValueError("alpha + beta must be positive")
        return self


class ProbabilityTriple(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_h: Probability
    p_p: Probability
    p_a: Probability

    @model_validator(mode="after")
    def _check_mode_dominance(self):
        if self.p_p > self.p_h + _SLACK or self.p_a > self.p_h + _SLACK:
            raise ValueError("p_h must be the largest probability of the triple")
        return self


class DistanceTriple(BaseModel):
    model_config = ConfigDict(frozen=True)

    d_hp: Probability
    d_pa: Probability
    d_ha: Probability

    @model_validator(mode="after")
    def _check_triangle(self):
        if self.d_ha > self.d_hp + self.d_pa + _SLACK:
            raise ValueError("d_ha must not exceed d_hp + d_pa")
        return self


class SampleEvaluation(BaseModel):
    model_config = ConfigDict(frozen=True)

    predicted: OutcomeLabel
    actual: OutcomeLabel
    probs: ProbabilityTriple
    distances: DistanceTriple
    case: CaseLabel
    err_score: Probability
    score: float = Field(ge=0.0, le=100.0)

    @property
    def matched(self) -> bool:
        return self.predicted == self.actual

    @model_validator(mode="after")
    def _check_exact_match(self):
        if self.matched and (self.err_score != 0.0 or self.score != 100.0):
            raise ValueError("an exact match must carry err_score 0 and score 100")
        return self


# ========== データセットと条件付き分布 ==========

class FeatureSchema(BaseModel):
    """入力特徴量（全てカテゴリ値）と出力列"""
    model_config = ConfigDict(frozen=True)

    features: Tuple[str, ...]
    outcome_column: str = Field(min_length=1)
    labels: Tuple[str, ...] = ()  # 観測されなくても出力アルファベットに含めるラベル

    @field_validator("features")
    @classmethod
    def _unique_features(cls, value):
        if any(not name for name in value):
            raise ValueError("feature names must be non-empty")
        if len(set(value)) != len(value):
            raise ValueError(f"duplicate feature names: {list(value)}")
        return value

    @model_validator(mode="after")
    def _outcome_not_a_feature(self):
        if self.outcome_column in self.features:
            raise ValueError(f"outcome column '{self.outcome_column}' is also an input feature")
        return self

    @property
    def n_features(self) -> int:
        return len(self.features)


class Sample(BaseModel):
    model_config = ConfigDict(frozen=True)

    values: Tuple[str, ...]
    outcome: OutcomeLabel


class ContextKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    reduced_values: Tuple[str, ...]


class ConditionalDistribution(BaseModel):
    """あるコンテキストにおける P(y | context)"""
    model_config = ConfigDict(frozen=True)

    context: ContextKey
    counts: Dict[str, int]
    probabilities: Dict[str, Probability]
    support_size: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_normalized(self):
        total = sum(self.counts.values())
        if any(count < 0 for count in self.counts.values()):
            raise ValueError("counts must be non-negative")
        if abs(sum(self.probabilities.values()) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        # 観測に基づく分布は count / total と一致する（一様分布などの代替分布は counts が全て 0）
        if total > 0:
            for label, probability in self.probabilities.items():
                if abs(probability - self.counts.get(label, 0) / total) > 1e-12:
                    raise ValueError(f"probability of '{label}' does not match its count")
        return self

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def mode(self) -> str:
        # 最大確率が複数ある場合は辞書順で最小のラベル
        return min(self.probabilities, key=lambda label: (-self.probabilities[label], label))

    @property
    def mode_probability(self) -> float:
        return max(self.probabilities.values())

    def probability(self, label: str) -> float:
        return self.probabilities.get(label, 0.0)


class DistributionTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    feature_schema: FeatureSchema
    excluded: Tuple[str, ...]
    alphabet: Tuple[str, ...]
    entries: Dict[ContextKey, ConditionalDistribution]
    marginal: ConditionalDistribution
    source: ProbabilitySource = ProbabilitySource.FULL

    @model_validator(mode="after")
    def _check_alphabet_coverage(self):
        expected = set(self.alphabet)
        for entry in list(self.entries.values()) + [self.marginal]:
            if set(entry.probabilities) != expected:
                raise ValueError(f"distribution for {entry.context.reduced_values} does not cover the alphabet")
        return self

    @property
    def n_contexts(self) -> int:
        return len(self.entries)


class SplitSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    train_fraction: float = Field(default=0.7, gt=0.0, lt=1.0)
    shuffle_count: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=-(2 ** 63), le=2 ** 64 - 1)


# ========== 入出力 ==========

class PredictionRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    row_index: int = Field(ge=0)
    predicted: OutcomeLabel


class PredictionFile(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: Tuple[PredictionRow, ...]

    def labels(self) -> List[str]:
        """評価行の順に並べた予測ラベル"""
        return [row.predicted for row in sorted(self.rows, key=lambda row: row.row_index)]


class ShuffleResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    shuffle_index: int = Field(ge=0)
    rs: float
    ca: float
    n_samples: int = Field(ge=1)


class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset_digest: str
    excluded: Tuple[str, ...] = ()
    seed: int = 0
    probability_source: ProbabilitySource = ProbabilitySource.FULL
    unseen_policy: UnseenPolicy = UnseenPolicy.UNIFORM
    train_fraction: Optional[float] = None
    shuffle_count: int = 1
    predictor: str = ""
    eval_digest: Optional[str] = None
    randomized: bool = False


class EvaluationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: str
    ca: float = Field(ge=0.0, le=100.0)
    rs: float = Field(ge=0.0, le=100.0)
    params: RsParams
    rs_alpha_inf: float = Field(ge=0.0, le=100.0)
    rs_beta_inf: float = Field(ge=0.0, le=100.0)
    case_histogram: Dict[CaseLabel, int]
    n_samples: int = Field(ge=1)
    shuffles: Tuple[ShuffleResult, ...] = ()
    per_sample: Optional[List[SampleEvaluation]] = None
    provenance: Provenance

    @model_validator(mode="after")
    def _check_consistency(self):
        if sum(self.case_histogram.values()) != self.n_samples:
            raise ValueError("case histogram does not sum to the number of evaluated samples")
        if self.per_sample is not None:
            if len(self.per_sample) != self.n_samples:
                raise ValueError("per-sample list length differs from n_samples")
            mean = float(np.mean([evaluation.score for evaluation in self.per_sample]))
            if abs(mean - self.rs) > 1e-9:
                raise ValueError(f"rs {self.rs} differs from the per-sample mean {mean}")
        return self


# ========== 実験 ==========

class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    pairs: Tuple[RsParams, ...] = Field(
        default=(RsParams(alpha=1, beta=2), RsParams(alpha=1, beta=1), RsParams(alpha=2, beta=1)),
        min_length=1,
    )
    include_limits: bool = True

    @classmethod
    def parse(cls, text: str, include_limits: bool = True) -> "SweepSpec":
        """'2:1,1:1,1:2' 形式の文字列を解析"""
        pairs = []
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            alpha, sep, beta = item.partition(":")
            if not sep:
                raise ValueError(f"malformed (alpha:beta) pair '{item}'")
            pairs.append(RsParams(alpha=float(alpha), beta=float(beta)))
        return cls(pairs=tuple(pairs), include_limits=include_limits)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset: Path
    eval_dataset: Optional[Path] = None
    outcome_column: Optional[str] = None
    delimiter: str = Field(default=",", min_length=1, max_length=1)
    labels: Tuple[str, ...] = ()
    excluded: Tuple[str, ...] = ()
    probability_source: ProbabilitySource = ProbabilitySource.FULL
    unseen_policy: UnseenPolicy = UnseenPolicy.UNIFORM
    split: SplitSpec = SplitSpec()
    params: RsParams = RsParams()
    baselines: Tuple[PredictorKind, ...] = ()
    prediction_files: Tuple[Path, ...] = ()
    out: Optional[Path] = None
    report_format: ReportFormat = ReportFormat.JSON
    include_samples: bool = False
    tolerance: float = Field(default=1e-9, ge=0.0)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_models(self):
        if not self.baselines and not self.prediction_files:
            raise ValueError("at least one baseline or prediction file must be given")
        return self


class ShuffleEvaluation(BaseModel):
    model_config = ConfigDict(frozen=True)

    shuffle_index: int
    evaluations: Tuple[SampleEvaluation, ...]


class ModelRun(BaseModel):
    """1 モデル分の全シャッフルのサンプル評価（α/β 非依存の距離を保持）"""
    model_config = ConfigDict(frozen=True)

    model: str
    shuffles: Tuple[ShuffleEvaluation, ...]
    randomized: bool = False
    # 実際に分布表を作った行の出どころ（None は設定どおり）
    probability_source: Optional[ProbabilitySource] = None


class ComparisonRow(BaseModel):
    model: str
    ca: float
    rs: float
    ca_rank: int
    rs_rank: int


class SweepRow(BaseModel):
    model: str
    alpha: Optional[float] = None
    beta: Optional[float] = None
    limit: Optional[str] = None  # "alpha_inf" / "beta_inf"
    rs: float


class BoundsRow(BaseModel):
    model: str
    rs_alpha_inf: float
    rs_beta_inf: float
    rs_alpha_large: float
    rs_beta_large: float
    converged: bool


class RandomControlCheck(BaseModel):
    model: str
    ca: float
    rs: float
    band_low: float
    band_high: float
    within_band: bool
    rs_dominates: bool


class RandomControlResult(BaseModel):
    real: List[EvaluationReport]
    randomized: List[EvaluationReport]
    alphabet_size: int
    expected_ca: float
    checks: List[RandomControlCheck]
