"""
ベースライン予測器・学習/テスト分割・出力ランダム化

外部の分類器を使わずに評価プロトコル全体を実行するための簡易モデル。
乱数は全て (ルートシード, 操作ごとのストリーム ID) から導出し、グローバル状態は使わない。
"""
import copy
import hashlib
import logging
import math
from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigurationError, EmptyDatasetError, SplitError
from models import ContextKey, DistributionTable, FeatureSchema, PredictorKind, ProbabilitySource, Sample, SplitSpec
from services.distribution import build_distribution_table, retained_indices

logger = logging.getLogger(__name__)

_MASK64 = 0xFFFF_FFFF_FFFF_FFFF


def derive_rng(seed: int, stream: str, *indices: int) -> np.random.Generator:
    """
    ルートシードとストリーム名から独立した乱数生成器を作る

    Args:
        seed: ルートシード（64 ビット整数）
        stream: 操作ごとのストリーム名
        indices: シャッフル番号などの追加インデックス

    Returns:
        numpy Generator
    """
    stream_id = int.from_bytes(hashlib.sha256(stream.encode("utf-8")).digest()[:8], "big")
    sequence = np.random.SeedSequence(seed & _MASK64, spawn_key=(stream_id, *indices))
    return np.random.default_rng(sequence)


def most_common(counts: Counter) -> str:
    # 最頻値が複数ある場合は辞書順で最小のラベル
    return min(counts.items(), key=lambda item: (-item[1], item[0]))[0]


# ========== 分割 ==========

def split_indices(m: int, spec: SplitSpec, shuffle_index: int) -> Tuple[List[int], List[int]]:
    """シャッフル後の (学習, テスト) 行番号。学習側は floor(train_fraction × m)"""
    if not 0 <= shuffle_index < spec.shuffle_count:
        raise ConfigurationError(f"Shuffle index {shuffle_index} outside [0, {spec.shuffle_count})")
    n_train = math.floor(spec.train_fraction * m + 1e-9)
    if n_train < 1 or m - n_train < 1:
        raise SplitError(
            f"Dataset of {m} samples is too small for train fraction {spec.train_fraction}: "
            f"{n_train} train / {m - n_train} test"
        )
    order = derive_rng(spec.seed, "split", shuffle_index).permutation(m)
    return [int(i) for i in order[:n_train]], [int(i) for i in order[n_train:]]


def split(dataset: Sequence[Sample], spec: SplitSpec, shuffle_index: int) -> Tuple[List[Sample], List[Sample]]:
    """データセットを学習/テストに分割（(seed, shuffle_index) に対して決定的）"""
    train_idx, test_idx = split_indices(len(dataset), spec, shuffle_index)
    return [dataset[i] for i in train_idx], [dataset[i] for i in test_idx]


# ========== 予測器 ==========

class BaselinePredictor:
    """学習済みベースライン予測器"""

    def __init__(
        self,
        kind: PredictorKind,
        table: DistributionTable,
        rng: Optional[np.random.Generator] = None,
        rule_feature: Optional[str] = None,
        rule: Optional[Dict[str, str]] = None,
        training_error: Optional[int] = None,
    ):
        self.kind = kind
        self.table = table
        self.alphabet = table.alphabet
        self.fallback = table.marginal.mode
        self.rule_feature = rule_feature
        self.rule = rule or {}
        self.training_error = training_error
        self._indices = retained_indices(table.excluded, table.feature_schema)
        self._rule_index = table.feature_schema.features.index(rule_feature) if rule_feature else None
        self._rng = rng

    def clone(self, rng: Optional[np.random.Generator] = None) -> "BaselinePredictor":
        """ワーカーごとの複製（乱数ストリームも複製）"""
        twin = copy.copy(self)
        twin._rng = rng if rng is not None else copy.deepcopy(self._rng)
        return twin

    def predict(self, test: Sequence[Sample]) -> List[str]:
        if self.kind == PredictorKind.MOST_PROBABLE:
            return [self._predict_mode(sample) for sample in test]
        if self.kind == PredictorKind.ZERO_RULE:
            return [self.fallback] * len(test)
        if self.kind == PredictorKind.ONE_RULE:
            if self._rule_index is None:
                return [self.fallback] * len(test)
            return [self.rule.get(sample.values[self._rule_index], self.fallback) for sample in test]
        if self.kind == PredictorKind.UNIFORM_RANDOM:
            draws = self._stream().integers(len(self.alphabet), size=len(test))
        else:
            weights = np.array([self.table.marginal.probabilities[label] for label in self.alphabet])
            draws = self._stream().choice(len(self.alphabet), size=len(test), p=weights)
        return [self.alphabet[int(j)] for j in draws]

    def _predict_mode(self, sample: Sample) -> str:
        entry = self.table.entries.get(ContextKey(reduced_values=tuple(sample.values[i] for i in self._indices)))
        return entry.mode if entry is not None else self.fallback

    def _stream(self) -> np.random.Generator:
        if self._rng is None:
            raise ConfigurationError(f"Predictor '{self.kind.value}' needs a random stream")
        return self._rng


def _fit_one_rule(train: Sequence[Sample], schema: FeatureSchema, indices: Iterable[int]):
    """学習誤差が最小になる 1 特徴量の規則（値 → 最頻出力）を選ぶ"""
    best: Optional[Tuple[int, str, Dict[str, str]]] = None
    for index in indices:
        by_value: Dict[str, Counter] = {}
        for sample in train:
            by_value.setdefault(sample.values[index], Counter())[sample.outcome] += 1
        rule = {value: most_common(counts) for value, counts in by_value.items()}
        error = sum(sum(counts.values()) - counts[rule[value]] for value, counts in by_value.items())
        if best is None or error < best[0]:
            best = (error, schema.features[index], rule)
    return best


def fit(
    kind: PredictorKind,
    train: Sequence[Sample],
    excluded: Iterable[str],
    schema: FeatureSchema,
    rng: Optional[np.random.Generator] = None,
) -> BaselinePredictor:
    """
    ベースライン予測器を学習

    Args:
        kind: 予測器の種類
        train: 学習サンプル
        excluded: コンテキストから除外する特徴量
        schema: 特徴量スキーマ
        rng: ランダム予測器の乱数ストリーム

    Returns:
        BaselinePredictor
    """
    if len(train) == 0:
        raise EmptyDatasetError("Cannot fit a predictor on an empty training set")

    table = build_distribution_table(train, excluded, schema, source=ProbabilitySource.TRAIN)
    if kind != PredictorKind.ONE_RULE:
        return BaselinePredictor(kind, table, rng=rng)

    fitted = _fit_one_rule(train, schema, retained_indices(table.excluded, schema))
    if fitted is None:
        # 全特徴量が除外されている場合は最頻値のみ
        error = len(train) - max(table.marginal.counts.values())
        return BaselinePredictor(kind, table, rng=rng, training_error=error)
    error, feature, rule = fitted
    logger.debug(f"OneRule selected feature '{feature}' with training error {error}/{len(train)}")
    return BaselinePredictor(kind, table, rng=rng, rule_feature=feature, rule=rule, training_error=error)


def predict(predictor: BaselinePredictor, test: Sequence[Sample]) -> List[str]:
    """テスト行ごとに 1 ラベルを予測"""
    return predictor.predict(test)


def randomize_outputs(
    dataset: Sequence[Sample],
    seed: int,
    labels: Sequence[str] = (),
    stream: str = "randomize-outputs",
) -> List[Sample]:
    """
    各行の出力を K ラベル上の一様乱数で置き換える（特徴量はそのまま）

    アルファベットは観測された出力と labels の和集合。K = 1 の場合は変更しない。
    """
    alphabet = sorted({sample.outcome for sample in dataset} | set(labels))
    if len(alphabet) <= 1:
        return list(dataset)
    draws = derive_rng(seed, stream).integers(len(alphabet), size=len(dataset))
    return [sample.model_copy(update={"outcome": alphabet[int(j)]}) for sample, j in zip(dataset, draws)]
