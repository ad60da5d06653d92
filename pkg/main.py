"""
RelevanceScore 評価ツールのコマンドライン

サブコマンド: evaluate / sweep / bounds / random-control / synthesize
終了コード: 0 成功, 1 設定エラー, 2 データエラー, 3 内部不変条件違反
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import BaseModel, ValidationError

from config import Config
from errors import ConfigurationError, RelevanceError
from models import (
    EvaluationReport,
    PredictorKind,
    ProbabilitySource,
    ReportFormat,
    RsParams,
    RunConfig,
    SplitSpec,
    SweepSpec,
    UnseenPolicy,
)
from services.dataset_io import write_dataset, write_report, write_table
from services.experiment_runner import ExperimentRunner
from services.synthetic import generate_lighting_dataset

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """引数エラーを終了コード 1 の設定エラーとして扱う"""

    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def _split_list(text: Optional[str]) -> tuple:
    if not text:
        return ()
    return tuple(item.strip() for item in text.split(",") if item.strip())


def _common_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--dataset", required=True, type=Path, help="Dataset file (header required)")
    common.add_argument("--eval-dataset", type=Path, default=None,
                        help="Rows that prediction files index into (defaults to --dataset)")
    common.add_argument("--outcome-column", default=None, help="Outcome column name (defaults to the last column)")
    common.add_argument("--delimiter", default=Config.DELIMITER)
    common.add_argument("--labels", default=None, help="Comma-separated outcome labels declared even if unobserved")
    common.add_argument("--exclude", default=None, help="Comma-separated features removed from the context")
    common.add_argument("--alpha", type=float, default=Config.DEFAULT_ALPHA)
    common.add_argument("--beta", type=float, default=Config.DEFAULT_BETA)
    common.add_argument("--predict-file", action="append", type=Path, default=[],
                        help="Prediction file with 'index,predicted' rows (repeatable)")
    common.add_argument("--baseline", action="append", default=[], choices=[kind.value for kind in PredictorKind],
                        help="Native baseline predictor (repeatable)")
    common.add_argument("--train-fraction", type=float, default=Config.TRAIN_FRACTION)
    common.add_argument("--shuffles", type=int, default=Config.SHUFFLE_COUNT)
    common.add_argument("--seed", type=int, default=Config.SEED)
    common.add_argument("--prob-source", default=Config.PROBABILITY_SOURCE,
                        choices=[source.value for source in ProbabilitySource])
    common.add_argument("--unseen", default=Config.UNSEEN_POLICY, choices=[policy.value for policy in UnseenPolicy])
    common.add_argument("--tolerance", type=float, default=Config.PROBABILITY_TOLERANCE)
    common.add_argument("--workers", type=int, default=Config.WORKERS)
    common.add_argument("--out", type=Path, default=None)
    common.add_argument("--format", default=ReportFormat.JSON.value, choices=[fmt.value for fmt in ReportFormat])
    common.add_argument("--samples", action="store_true", help="Include per-sample evaluations in reports")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="relevance-score", description="Relevance Score / Classification Accuracy toolkit")
    parser.add_argument("--log-level", default=Config.LOG_LEVEL)
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    common = _common_parser()

    evaluate = commands.add_parser("evaluate", parents=[common], help="CA vs RS per model")
    evaluate.set_defaults(handler=cmd_evaluate)

    sweep = commands.add_parser("sweep", parents=[common], help="RS over (alpha, beta) pairs")
    sweep.add_argument("--pairs", default=Config.SWEEP_PAIRS, help="Pairs as 'alpha:beta,...'")
    sweep.add_argument("--no-limits", action="store_true", help="Omit the alpha/beta -> infinity rows")
    sweep.set_defaults(handler=cmd_sweep)

    bounds = commands.add_parser("bounds", parents=[common], help="RS limits as alpha or beta grows")
    bounds.set_defaults(handler=cmd_bounds)

    control = commands.add_parser("random-control", parents=[common], help="Real vs randomized outputs")
    control.set_defaults(handler=cmd_random_control)

    synthesize = commands.add_parser("synthesize", help="Write a synthetic lighting-style dataset")
    synthesize.add_argument("--rows", type=int, default=236)
    synthesize.add_argument("--seed", type=int, default=Config.SEED)
    synthesize.add_argument("--consistency", type=float, default=0.7)
    synthesize.add_argument("--users", type=int, default=4)
    synthesize.add_argument("--delimiter", default=Config.DELIMITER)
    synthesize.add_argument("--out", type=Path, default=Path(Config.OUTPUT_DIR) / "lighting.csv")
    synthesize.set_defaults(handler=cmd_synthesize)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """コマンドライン引数を RunConfig に変換"""
    return RunConfig(
        dataset=args.dataset,
        eval_dataset=args.eval_dataset,
        outcome_column=args.outcome_column,
        delimiter=args.delimiter,
        labels=_split_list(args.labels),
        excluded=_split_list(args.exclude),
        probability_source=ProbabilitySource(args.prob_source),
        unseen_policy=UnseenPolicy(args.unseen),
        split=SplitSpec(train_fraction=args.train_fraction, shuffle_count=args.shuffles, seed=args.seed),
        params=RsParams(alpha=args.alpha, beta=args.beta),
        baselines=tuple(PredictorKind(kind) for kind in args.baseline),
        prediction_files=tuple(args.predict_file),
        out=args.out,
        report_format=ReportFormat(args.format),
        include_samples=args.samples,
        tolerance=args.tolerance,
        workers=args.workers,
    )


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}-{suffix}{out.suffix}")


def _print_table(rows: Sequence[BaseModel]) -> None:
    if not rows:
        return
    records = [row.model_dump(mode="json") for row in rows]
    print("\t".join(records[0].keys()))
    for record in records:
        print("\t".join(_format_cell(value) for value in record.values()))


def _format_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _write_reports(reports: List[EvaluationReport], config: RunConfig, label: Optional[str] = None) -> None:
    out = config.out
    if label:
        out = _sibling(out, label)
    if len(reports) == 1:
        write_report(reports[0], out, config.report_format)
        return
    for report in reports:
        write_report(report, _sibling(out, report.model), config.report_format)


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    runner = ExperimentRunner(config)
    reports = runner.cmd_evaluate()
    comparison = runner.compare(reports)
    _print_table(comparison)
    if config.out is not None:
        _write_reports(reports, config)
        if len(reports) > 1:
            write_table(comparison, _sibling(config.out, "comparison"), config.report_format)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    try:
        sweep = SweepSpec.parse(args.pairs, include_limits=not args.no_limits)
    except ValueError as e:
        raise ConfigurationError(f"Invalid --pairs '{args.pairs}': {e}") from e
    rows = ExperimentRunner(config).cmd_sweep(sweep)
    _print_table(rows)
    if config.out is not None:
        write_table(rows, config.out, config.report_format)
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    rows = ExperimentRunner(config).cmd_bounds()
    _print_table(rows)
    if config.out is not None:
        write_table(rows, config.out, config.report_format)
    return 0


def cmd_random_control(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    result = ExperimentRunner(config).cmd_random_control()
    print(f"K={result.alphabet_size} expected CA={result.expected_ca:.6g}")
    _print_table(result.checks)
    if config.out is not None:
        _write_reports(result.real, config, "real")
        _write_reports(result.randomized, config, "randomized")
        write_table(result.checks, _sibling(config.out, "checks"), config.report_format)
    return 0


def cmd_synthesize(args: argparse.Namespace) -> int:
    try:
        schema, samples = generate_lighting_dataset(args.rows, args.seed, args.consistency, args.users)
    except ValueError as e:
        raise ConfigurationError(str(e)) from e
    write_dataset(schema, samples, args.out, args.delimiter)
    print(f"✅ {len(samples)} rows written to {args.out}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI を実行して終了コードを返す"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigurationError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO))
    try:
        return args.handler(args)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        print(f"❌ Invalid configuration: {e}", file=sys.stderr)
        return ConfigurationError.exit_code
    except RelevanceError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"Internal error: {e}", exc_info=True)
        print(f"❌ Internal error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
