import pytest

from models import ContextKey, DistanceTriple, FeatureSchema, ProbabilityTriple, RsParams, Sample, SampleEvaluation
from services.distribution import build_distribution_table
from services.relevance_metric import classify_case, err_score


@pytest.fixture
def toy_schema():
    return FeatureSchema(features=("user", "activity", "time"), outcome_column="light")


@pytest.fixture
def mixed_context_samples():
    """同一コンテキスト (read, morning) で LA×4, LB×4, LC×2"""
    outcomes = ["LA"] * 4 + ["LB"] * 4 + ["LC"] * 2
    return [Sample(values=(f"U{i % 3}", "read", "morning"), outcome=o) for i, o in enumerate(outcomes)]


@pytest.fixture
def d0(toy_schema, mixed_context_samples):
    table = build_distribution_table(mixed_context_samples, {"user"}, toy_schema)
    return table.entries[ContextKey(reduced_values=("read", "morning"))]


@pytest.fixture
def write_file(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


def evaluation_with(d_hp: float, d_pa: float, params: RsParams = RsParams(), matched: bool = False) -> SampleEvaluation:
    """指定した距離を持つサンプル評価（d_hp, d_pa ≤ 0.5 を想定）"""
    if matched:
        probs = ProbabilityTriple(p_h=1.0, p_p=1.0, p_a=1.0)
        return SampleEvaluation(
            predicted="LA", actual="LA", probs=probs,
            distances=DistanceTriple(d_hp=0.0, d_pa=0.0, d_ha=0.0),
            case=classify_case("LA", "LA", probs), err_score=0.0, score=100.0,
        )
    p_p = 1.0 - d_hp
    probs = ProbabilityTriple(p_h=1.0, p_p=p_p, p_a=max(0.0, p_p - d_pa))
    distances = DistanceTriple(d_hp=d_hp, d_pa=d_pa, d_ha=min(1.0, d_hp + d_pa))
    error = err_score(distances, params)
    return SampleEvaluation(
        predicted="LB", actual="LC", probs=probs, distances=distances,
        case=classify_case("LB", "LC", probs), err_score=error, score=(1.0 - error) * 100.0,
    )


@pytest.fixture
def make_evaluation():
    return evaluation_with
