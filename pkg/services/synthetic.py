"""
照明シナリオを模した合成データセット

6 つのカテゴリ特徴量と 8 種類の照明プリセット（強さ × 色温度 × 広がりの 2×2×2）。
ユーザー ID を除いたコンテキストごとに好みのプリセットがあり、
各ユーザーは確率 consistency でそれを選び、それ以外はユーザー固有の別プリセットを選ぶ。
"""
import itertools
import logging
from typing import Dict, List, Sequence, Tuple

from models import FeatureSchema, Sample
from services.baselines import derive_rng

logger = logging.getLogger(__name__)

LIGHTING_FEATURES = ("user", "activity", "area", "occupancy", "time_of_day", "external_light")
LIGHTING_OUTCOME = "preset"
RANDOMNESS_FEATURE = "user"

_DOMAINS = {
    "activity": ("read", "talk", "present", "relax"),
    "area": ("desk", "lounge", "window"),
    "occupancy": ("one", "few", "many"),
    "time_of_day": ("morning", "afternoon", "evening"),
    "external_light": ("bright", "dark"),
}

LIGHTING_PRESETS = tuple(
    f"{intensity}-{temperature}-{spread}"
    for intensity, temperature, spread in itertools.product(("dim", "bright"), ("warm", "cool"), ("narrow", "wide"))
)


def lighting_schema() -> FeatureSchema:
    return FeatureSchema(features=LIGHTING_FEATURES, outcome_column=LIGHTING_OUTCOME, labels=LIGHTING_PRESETS)


def generate_lighting_dataset(
    rows: int,
    seed: int = 0,
    consistency: float = 0.7,
    users: int = 4,
) -> Tuple[FeatureSchema, List[Sample]]:
    """
    照明シナリオの合成データセットを生成

    Args:
        rows: 行数
        seed: ルートシード
        consistency: ユーザーが好みのプリセットを選ぶ確率
        users: ユーザー数

    Returns:
        (FeatureSchema, サンプル列)
    """
    if rows < 1:
        raise ValueError(f"rows must be positive, got {rows}")
    if not 0.0 <= consistency <= 1.0:
        raise ValueError(f"consistency must lie in [0, 1], got {consistency}")
    if users < 1:
        raise ValueError(f"users must be positive, got {users}")

    rng = derive_rng(seed, "synthetic-lighting")
    names = tuple(_DOMAINS)
    contexts = list(itertools.product(*(_DOMAINS[name] for name in names)))
    preferred: Dict[Tuple[str, ...], int] = {
        context: int(choice) for context, choice in zip(contexts, rng.integers(len(LIGHTING_PRESETS), size=len(contexts)))
    }
    user_ids = [f"U{i + 1}" for i in range(users)]
    # ユーザーごとの好みのずれ（1..7）
    shifts = {user: int(shift) for user, shift in zip(user_ids, rng.integers(1, len(LIGHTING_PRESETS), size=users))}

    samples = []
    for _ in range(rows):
        context = tuple(_DOMAINS[name][int(rng.integers(len(_DOMAINS[name])))] for name in names)
        user = user_ids[int(rng.integers(users))]
        choice = preferred[context]
        if rng.random() >= consistency:
            choice = (choice + shifts[user]) % len(LIGHTING_PRESETS)
        samples.append(Sample(values=(user,) + context, outcome=LIGHTING_PRESETS[choice]))

    logger.info(f"Generated lighting dataset: {rows} rows, {users} users, consistency {consistency}")
    return lighting_schema(), samples


def generate_random_dataset(
    rows: int,
    labels: Sequence[str] = LIGHTING_PRESETS,
    n_features: int = 3,
    values_per_feature: int = 4,
    seed: int = 0,
) -> Tuple[FeatureSchema, List[Sample]]:
    """特徴量も出力も一様乱数のデータセット（入出力に関係がない対照用）"""
    if rows < 1:
        raise ValueError(f"rows must be positive, got {rows}")
    if not labels:
        raise ValueError("labels must not be empty")

    rng = derive_rng(seed, "synthetic-random")
    features = tuple(f"f{i + 1}" for i in range(n_features))
    values = rng.integers(values_per_feature, size=(rows, n_features))
    outcomes = rng.integers(len(labels), size=rows)
    samples = [
        Sample(values=tuple(f"v{int(v)}" for v in row), outcome=labels[int(outcome)])
        for row, outcome in zip(values, outcomes)
    ]
    schema = FeatureSchema(features=features, outcome_column="outcome", labels=tuple(labels))
    return schema, samples
