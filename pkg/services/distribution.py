"""
経験的条件付き分布 P(y | 縮約コンテキスト) の構築

ランダム性の原因となる特徴量（照明データではユーザー ID）を除外したうえで
残りの特徴量が一致するサンプルを同じコンテキストとしてまとめる。
"""
import logging
from collections import Counter, defaultdict
from typing import Dict, Iterable, List, Sequence, Tuple

from errors import ArityMismatchError, EmptyDatasetError, MissingDistributionError, UnknownFeatureError
from models import (
    ConditionalDistribution,
    ContextKey,
    DistributionTable,
    FeatureSchema,
    ProbabilitySource,
    Sample,
    UnseenPolicy,
)

logger = logging.getLogger(__name__)


def retained_indices(excluded: Iterable[str], schema: FeatureSchema) -> Tuple[int, ...]:
    """除外集合を除いた特徴量の位置（スキーマ順）"""
    excluded = set(excluded)
    for name in sorted(excluded):
        if name not in schema.features:
            raise UnknownFeatureError(name, schema.features)
    return tuple(i for i, name in enumerate(schema.features) if name not in excluded)


def _project(sample: Sample, indices: Tuple[int, ...]) -> ContextKey:
    return ContextKey(reduced_values=tuple(sample.values[i] for i in indices))


def reduce_context(sample: Sample, excluded: Iterable[str], schema: FeatureSchema) -> ContextKey:
    """サンプルを除外後の特徴量に射影したコンテキストキー"""
    if len(sample.values) != schema.n_features:
        raise ArityMismatchError(
            f"Sample has {len(sample.values)} feature values, schema declares {schema.n_features}"
        )
    return _project(sample, retained_indices(excluded, schema))


def distribution_from_counts(context: ContextKey, counts: Dict[str, int], alphabet: Sequence[str]) -> ConditionalDistribution:
    total = sum(counts.values())
    full_counts = {label: int(counts.get(label, 0)) for label in alphabet}
    return ConditionalDistribution(
        context=context,
        counts=full_counts,
        probabilities={label: full_counts[label] / total for label in alphabet},
        support_size=sum(1 for count in full_counts.values() if count > 0),
    )


def uniform_distribution(context: ContextKey, alphabet: Sequence[str]) -> ConditionalDistribution:
    """観測のないコンテキスト用の一様分布（counts は全て 0）"""
    k = len(alphabet)
    return ConditionalDistribution(
        context=context,
        counts={label: 0 for label in alphabet},
        probabilities={label: 1.0 / k for label in alphabet},
        support_size=k,
    )


def build_distribution_table(
    dataset: Sequence[Sample],
    excluded: Iterable[str],
    schema: FeatureSchema,
    source: ProbabilitySource = ProbabilitySource.FULL,
) -> DistributionTable:
    """
    データセットからコンテキストごとの条件付き分布テーブルを構築

    Args:
        dataset: サンプル列
        excluded: コンテキストから除外する特徴量名
        schema: 特徴量スキーマ（labels は未観測でもアルファベットに含める）
        source: テーブルの構築元（全データ / 学習データのみ）

    Returns:
        DistributionTable
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("Cannot build a distribution table from an empty dataset")

    excluded = tuple(sorted(set(excluded)))
    indices = retained_indices(excluded, schema)

    groups: Dict[ContextKey, Counter] = defaultdict(Counter)
    marginal: Counter = Counter()
    for row, sample in enumerate(dataset):
        if len(sample.values) != schema.n_features:
            raise ArityMismatchError(
                f"Sample {row} has {len(sample.values)} feature values, schema declares {schema.n_features}"
            )
        groups[_project(sample, indices)][sample.outcome] += 1
        marginal[sample.outcome] += 1

    alphabet = tuple(sorted(set(marginal) | set(schema.labels)))
    entries = {
        key: distribution_from_counts(key, counts, alphabet)
        for key, counts in sorted(groups.items(), key=lambda item: item[0].reduced_values)
    }
    logger.debug(f"Built distribution table: {len(dataset)} samples, {len(entries)} contexts, K={len(alphabet)}")
    return DistributionTable(
        feature_schema=schema,
        excluded=excluded,
        alphabet=alphabet,
        entries=entries,
        marginal=distribution_from_counts(ContextKey(reduced_values=()), marginal, alphabet),
        source=source,
    )


def lookup(
    table: DistributionTable,
    key: ContextKey,
    policy: UnseenPolicy = UnseenPolicy.UNIFORM,
) -> ConditionalDistribution:
    """
    コンテキストの分布を取得

    未知のコンテキストは policy に従う:
    ERROR は例外、UNIFORM はアルファベット上の一様分布、MARGINAL はデータ全体の分布。
    """
    entry = table.entries.get(key)
    if entry is not None:
        return entry
    if policy == UnseenPolicy.ERROR:
        raise MissingDistributionError(f"No distribution for unseen context {list(key.reduced_values)}")
    if policy == UnseenPolicy.UNIFORM:
        return uniform_distribution(key, table.alphabet)
    return table.marginal.model_copy(update={"context": key})


def lookup_rows(
    table: DistributionTable,
    rows: Sequence[Sample],
    policy: UnseenPolicy = UnseenPolicy.UNIFORM,
) -> List[ConditionalDistribution]:
    """評価行ごとの分布（未知コンテキストの件数をログに残す）"""
    indices = retained_indices(table.excluded, table.feature_schema)
    result = []
    unseen = 0
    for sample in rows:
        key = _project(sample, indices)
        if key not in table.entries:
            unseen += 1
        result.append(lookup(table, key, policy))
    if unseen:
        logger.warning(f"{unseen} of {len(rows)} evaluation rows have unseen contexts; applied '{policy.value}' policy")
    return result
