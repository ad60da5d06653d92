"""
評価実験の実行

CA と RS の比較、α/β スイープ、α→∞・β→∞ の上下限、ランダム出力データでの対照実験。
"""
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TypeVar

from config import Config
from errors import InvariantViolationError, RelevanceError, SchemaError
from models import (
    BoundsRow,
    CaseLabel,
    ComparisonRow,
    DistributionTable,
    EvaluationReport,
    ModelRun,
    PredictorKind,
    ProbabilitySource,
    Provenance,
    RandomControlCheck,
    RandomControlResult,
    RsParams,
    RunConfig,
    Sample,
    SampleEvaluation,
    ShuffleEvaluation,
    ShuffleResult,
    SweepRow,
    SweepSpec,
)
from services.baselines import derive_rng, fit, predict, randomize_outputs, split
from services.dataset_io import file_digest, load_dataset, load_predictions
from services.distribution import build_distribution_table, lookup_rows, retained_indices
from services.relevance_metric import (
    classification_accuracy,
    mean_score,
    relevance_score,
    relevance_score_at,
    rs_limit_alpha,
    rs_limit_beta,
    score_sample,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ExperimentRunner:
    """RS/CA 評価実験のオーケストレーター"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.schema, self.dataset = load_dataset(
            config.dataset, config.outcome_column, config.delimiter, config.labels
        )
        self.dataset_digest = file_digest(config.dataset)

        self.eval_rows: Optional[List[Sample]] = None
        self.eval_digest: Optional[str] = None
        if config.eval_dataset is not None:
            eval_schema, self.eval_rows = load_dataset(
                config.eval_dataset, self.schema.outcome_column, config.delimiter, config.labels
            )
            if eval_schema.features != self.schema.features:
                raise SchemaError(
                    f"Evaluation dataset features {list(eval_schema.features)} differ from "
                    f"dataset features {list(self.schema.features)}"
                )
            self.eval_digest = file_digest(config.eval_dataset)

        # 除外特徴量をここで検証しておく
        retained_indices(config.excluded, self.schema)
        logger.info(
            f"ExperimentRunner initialized: {len(self.dataset)} samples, excluded={list(config.excluded)}, "
            f"source={config.probability_source.value}, unseen={config.unseen_policy.value}"
        )

    # ========== モデルの実行 ==========

    def run_models(
        self,
        dataset: Optional[Sequence[Sample]] = None,
        eval_rows: Optional[Sequence[Sample]] = None,
        randomized: bool = False,
    ) -> List[ModelRun]:
        """全モデル・全シャッフルのサンプル評価を計算（(モデル, シャッフル) の順で結合）"""
        dataset = self.dataset if dataset is None else dataset
        eval_rows = self.eval_rows if eval_rows is None else eval_rows
        runs: List[ModelRun] = []

        if self.config.baselines:
            full_table = None
            if self.config.probability_source == ProbabilitySource.FULL:
                full_table = self._table(dataset, ProbabilitySource.FULL)
            shuffle_count = self.config.split.shuffle_count
            tasks = [(kind, s) for kind in self.config.baselines for s in range(shuffle_count)]
            results = self._map(lambda task: self._run_baseline_shuffle(task[0], task[1], dataset, full_table), tasks)
            for position, kind in enumerate(self.config.baselines):
                shuffles = results[position * shuffle_count:(position + 1) * shuffle_count]
                runs.append(ModelRun(model=kind.value, shuffles=tuple(shuffles), randomized=randomized))

        for path in self.config.prediction_files:
            runs.append(self._run_prediction_file(path, dataset, eval_rows, randomized))
        return runs

    def _map(self, fn: Callable[..., T], tasks: list) -> List[T]:
        if self.config.workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
                return list(executor.map(fn, tasks))
        return [fn(task) for task in tasks]

    def _table(self, rows: Sequence[Sample], source: ProbabilitySource) -> DistributionTable:
        return build_distribution_table(rows, self.config.excluded, self.schema, source)

    def _score(self, rows: Sequence[Sample], predicted: Sequence[str], table: DistributionTable) -> List[SampleEvaluation]:
        distributions = lookup_rows(table, rows, self.config.unseen_policy)
        return [
            score_sample(label, row.outcome, dist, self.config.params, self.config.tolerance)
            for label, row, dist in zip(predicted, rows, distributions)
        ]

    def _run_baseline_shuffle(
        self,
        kind: PredictorKind,
        shuffle_index: int,
        dataset: Sequence[Sample],
        full_table: Optional[DistributionTable],
    ) -> ShuffleEvaluation:
        try:
            train, test = split(dataset, self.config.split, shuffle_index)
            table = full_table if full_table is not None else self._table(train, ProbabilitySource.TRAIN)
            rng = derive_rng(self.config.split.seed, f"predictor:{kind.value}", shuffle_index)
            predictor = fit(kind, train, self.config.excluded, self.schema, rng=rng)
            evaluations = self._score(test, predict(predictor, test), table)
        except RelevanceError as e:
            e.model = kind.value
            logger.error(f"Error evaluating {kind.value} on shuffle {shuffle_index}: {e}", exc_info=True)
            raise
        logger.info(
            f"{kind.value} shuffle {shuffle_index + 1}/{self.config.split.shuffle_count}: "
            f"{len(train)} train / {len(test)} test"
        )
        return ShuffleEvaluation(shuffle_index=shuffle_index, evaluations=tuple(evaluations))

    def _run_prediction_file(
        self,
        path: Path,
        dataset: Sequence[Sample],
        eval_rows: Optional[Sequence[Sample]],
        randomized: bool,
    ) -> ModelRun:
        model = Path(path).stem
        try:
            rows = list(eval_rows) if eval_rows is not None else list(dataset)
            predictions = load_predictions(path, len(rows)).labels()
            source = self.config.probability_source
            if source == ProbabilitySource.FULL:
                table_rows = list(dataset) + (list(eval_rows) if eval_rows is not None else [])
            else:
                if eval_rows is None:
                    # 評価行そのものが分布表に入るので実質 full
                    logger.warning("Probability source 'train' without an evaluation dataset: recording 'full' in provenance")
                    source = ProbabilitySource.FULL
                table_rows = list(dataset)
            table = self._table(table_rows, source)
            evaluations = self._score(rows, predictions, table)
        except RelevanceError as e:
            e.model = model
            logger.error(f"Error evaluating prediction file {path}: {e}", exc_info=True)
            raise
        logger.info(f"Scored prediction file {path}: {len(rows)} rows")
        return ModelRun(
            model=model,
            shuffles=(ShuffleEvaluation(shuffle_index=0, evaluations=tuple(evaluations)),),
            randomized=randomized,
            probability_source=source,
        )

    # ========== レポート ==========

    def _provenance(self, run: ModelRun) -> Provenance:
        is_baseline = run.model in {kind.value for kind in self.config.baselines}
        return Provenance(
            dataset_digest=self.dataset_digest,
            excluded=tuple(sorted(self.config.excluded)),
            seed=self.config.split.seed,
            probability_source=run.probability_source or self.config.probability_source,
            unseen_policy=self.config.unseen_policy,
            train_fraction=self.config.split.train_fraction if is_baseline else None,
            shuffle_count=len(run.shuffles),
            predictor=run.model if is_baseline else f"file:{run.model}",
            eval_digest=None if is_baseline else self.eval_digest,
            randomized=run.randomized,
        )

    def build_report(self, run: ModelRun) -> EvaluationReport:
        """シャッフルごとの RS/CA を平均したレポート"""
        shuffle_results: List[ShuffleResult] = []
        alpha_limits: List[float] = []
        beta_limits: List[float] = []
        histogram: Counter = Counter()
        all_evaluations: List[SampleEvaluation] = []

        for shuffle in run.shuffles:
            evaluations = shuffle.evaluations
            shuffle_results.append(ShuffleResult(
                shuffle_index=shuffle.shuffle_index,
                rs=relevance_score(evaluations),
                ca=classification_accuracy([e.predicted for e in evaluations], [e.actual for e in evaluations]),
                n_samples=len(evaluations),
            ))
            alpha_limits.append(rs_limit_alpha(evaluations))
            beta_limits.append(rs_limit_beta(evaluations))
            histogram.update(evaluation.case for evaluation in evaluations)
            all_evaluations.extend(evaluations)

        return EvaluationReport(
            model=run.model,
            ca=mean_score([result.ca for result in shuffle_results]),
            rs=mean_score([result.rs for result in shuffle_results]),
            params=self.config.params,
            rs_alpha_inf=mean_score(alpha_limits),
            rs_beta_inf=mean_score(beta_limits),
            case_histogram={case: histogram.get(case, 0) for case in CaseLabel},
            n_samples=len(all_evaluations),
            shuffles=tuple(shuffle_results),
            per_sample=all_evaluations if self.config.include_samples else None,
            provenance=self._provenance(run),
        )

    # ========== コマンド ==========

    def cmd_evaluate(self) -> List[EvaluationReport]:
        """
        モデルごとに CA と RS を計算

        Returns:
            モデルごとの評価レポート
        """
        logger.info("Step 1: Scoring models")
        runs = self.run_models()
        logger.info("Step 2: Aggregating reports")
        reports = [self.build_report(run) for run in runs]
        for report in reports:
            logger.info(f"{report.model}: CA={report.ca:.4f} RS={report.rs:.4f}")
        return reports

    def compare(self, reports: Sequence[EvaluationReport]) -> List[ComparisonRow]:
        """CA と RS による順位の比較表（順位が食い違うモデルの組をログに出す）"""
        ca_order = sorted(reports, key=lambda r: (-r.ca, r.model))
        rs_order = sorted(reports, key=lambda r: (-r.rs, r.model))
        ca_rank = {report.model: rank for rank, report in enumerate(ca_order, start=1)}
        rs_rank = {report.model: rank for rank, report in enumerate(rs_order, start=1)}

        for a in reports:
            for b in reports:
                if a.ca < b.ca and a.rs > b.rs:
                    logger.info(f"{a.model} has lower CA than {b.model} but higher RS")

        return [
            ComparisonRow(model=r.model, ca=r.ca, rs=r.rs, ca_rank=ca_rank[r.model], rs_rank=rs_rank[r.model])
            for r in reports
        ]

    def cmd_sweep(self, sweep: SweepSpec) -> List[SweepRow]:
        """
        (α, β) の組ごとの RS

        距離は α/β に依存しないため、サンプル評価は 1 回だけ計算して使い回す。
        """
        runs = self.run_models()
        rows: List[SweepRow] = []
        for run in runs:
            for params in sweep.pairs:
                rs = mean_score([relevance_score_at(s.evaluations, params) for s in run.shuffles])
                rows.append(SweepRow(model=run.model, alpha=params.alpha, beta=params.beta, rs=rs))
            if sweep.include_limits:
                rows.append(SweepRow(
                    model=run.model, limit="alpha_inf",
                    rs=mean_score([rs_limit_alpha(s.evaluations) for s in run.shuffles]),
                ))
                rows.append(SweepRow(
                    model=run.model, limit="beta_inf",
                    rs=mean_score([rs_limit_beta(s.evaluations) for s in run.shuffles]),
                ))
        logger.info(f"Sweep computed: {len(rows)} rows over {len(runs)} models")
        return rows

    def cmd_bounds(self) -> List[BoundsRow]:
        """α→∞・β→∞ の RS と、大きな有限重みでの数値確認"""
        weight = Config.LIMIT_WEIGHT
        rows: List[BoundsRow] = []
        for run in self.run_models():
            rs_alpha_inf = mean_score([rs_limit_alpha(s.evaluations) for s in run.shuffles])
            rs_beta_inf = mean_score([rs_limit_beta(s.evaluations) for s in run.shuffles])
            rs_alpha_large = mean_score(
                [relevance_score_at(s.evaluations, RsParams(alpha=weight, beta=1.0)) for s in run.shuffles]
            )
            rs_beta_large = mean_score(
                [relevance_score_at(s.evaluations, RsParams(alpha=1.0, beta=weight)) for s in run.shuffles]
            )
            converged = (
                abs(rs_alpha_large - rs_alpha_inf) <= Config.LIMIT_TOLERANCE
                and abs(rs_beta_large - rs_beta_inf) <= Config.LIMIT_TOLERANCE
            )
            if not converged:
                raise InvariantViolationError(
                    f"RS at large weights ({rs_alpha_large}, {rs_beta_large}) does not match the limits "
                    f"({rs_alpha_inf}, {rs_beta_inf})",
                    model=run.model,
                )
            rows.append(BoundsRow(
                model=run.model,
                rs_alpha_inf=rs_alpha_inf,
                rs_beta_inf=rs_beta_inf,
                rs_alpha_large=rs_alpha_large,
                rs_beta_large=rs_beta_large,
                converged=converged,
            ))
        return rows

    def cmd_random_control(self) -> RandomControlResult:
        """
        実データと出力をランダム化したデータで評価を比較

        ランダム化側の CA が 100/K の周り（二項分布の標準誤差の数倍）に収まるかを確認する。
        """
        logger.info("Step 1: Evaluating models on the real outputs")
        real = [self.build_report(run) for run in self.run_models()]

        observed = {sample.outcome for sample in self.dataset}
        if self.eval_rows is not None:
            observed |= {sample.outcome for sample in self.eval_rows}
        alphabet = tuple(sorted(observed | set(self.schema.labels)))
        seed = self.config.split.seed

        logger.info(f"Step 2: Randomizing outputs over K={len(alphabet)} labels")
        randomized_dataset = randomize_outputs(self.dataset, seed, alphabet)
        randomized_eval = None
        if self.eval_rows is not None:
            randomized_eval = randomize_outputs(self.eval_rows, seed, alphabet, stream="randomize-eval")

        logger.info("Step 3: Evaluating models on the randomized outputs")
        randomized = [
            self.build_report(run)
            for run in self.run_models(randomized_dataset, randomized_eval, randomized=True)
        ]

        k = len(alphabet)
        expected = 100.0 / k
        checks = []
        for report in randomized:
            # シャッフル間でテスト行が重なるため、1 シャッフル分のテスト件数で標準誤差を取る
            p = 1.0 / k
            n_test = report.n_samples / max(1, len(report.shuffles))
            band = Config.CA_BAND_STANDARD_ERRORS * 100.0 * math.sqrt(p * (1.0 - p) / n_test)
            within = expected - band <= report.ca <= expected + band
            if not within:
                logger.warning(f"{report.model}: randomized CA {report.ca:.4f} outside {expected:.4f} ± {band:.4f}")
            checks.append(RandomControlCheck(
                model=report.model,
                ca=report.ca,
                rs=report.rs,
                band_low=expected - band,
                band_high=expected + band,
                within_band=within,
                rs_dominates=report.rs >= report.ca - 1e-9,
            ))
        return RandomControlResult(
            real=real,
            randomized=randomized,
            alphabet_size=k,
            expected_ca=expected,
            checks=checks,
        )
