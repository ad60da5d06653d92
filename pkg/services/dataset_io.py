"""
データセット・予測ファイルの読み込みと評価レポートの書き出し
"""
import csv
import hashlib
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel

from errors import (
    DatasetError,
    DatasetNotFoundError,
    DuplicateIndexError,
    EmptyDatasetError,
    EmptyTokenError,
    IncompleteCoverageError,
    IndexOutOfRangeError,
    MissingOutcomeColumnError,
    PredictionFileError,
    RaggedRowError,
    ReportWriteError,
)
from models import (
    CaseLabel,
    EvaluationReport,
    FeatureSchema,
    PredictionFile,
    PredictionRow,
    Provenance,
    ReportFormat,
    RsParams,
    Sample,
    SampleEvaluation,
    ShuffleResult,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PREDICTION_HEADER = ("index", "predicted")


def file_digest(path: PathLike) -> str:
    """ファイル内容の SHA-256"""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_rows(path: Path, delimiter: str):
    """空行を除いた (行番号, トークン列) を返す"""
    if not path.is_file():
        raise DatasetNotFoundError("File not found", path=path)
    # 表計算ソフトの書き出しは先頭に BOM が付く
    with path.open("r", encoding="utf-8-sig", newline="") as handle:
        reader = csv.reader(handle, delimiter=delimiter, quoting=csv.QUOTE_NONE)
        try:
            for tokens in reader:
                if not tokens or (len(tokens) == 1 and not tokens[0].strip()):
                    continue
                yield reader.line_num, [token.strip() for token in tokens]
        except UnicodeDecodeError as e:
            row, offset = _undecodable_position(path)
            raise DatasetError(f"Invalid UTF-8 at byte offset {offset}", path=path, row=row) from e
        except csv.Error as e:
            raise DatasetError(f"Malformed delimited text: {e}", path=path, row=reader.line_num) from e


def _undecodable_position(path: Path) -> Tuple[int, int]:
    """最初の不正バイトの (行番号, バイト位置)"""
    raw = path.read_bytes()
    try:
        raw.decode("utf-8")
    except UnicodeDecodeError as e:
        return raw.count(b"\n", 0, e.start) + 1, e.start
    return 1, 0


def _check_tokens(tokens: List[str], path: Path, line: int) -> None:
    for column, token in enumerate(tokens, start=1):
        if not token:
            raise EmptyTokenError("Empty token", path=path, row=line, column=column)


def load_dataset(
    path: PathLike,
    outcome_column: Optional[str] = None,
    delimiter: str = ",",
    labels: Sequence[str] = (),
) -> Tuple[FeatureSchema, List[Sample]]:
    """
    区切り文字形式のデータセットを読み込む

    Args:
        path: データセットファイル（UTF-8、先頭行はヘッダー）
        outcome_column: 出力列名（省略時は最終列）
        delimiter: 区切り文字
        labels: 観測されなくても出力アルファベットに含めるラベル

    Returns:
        (FeatureSchema, サンプル列)
    """
    path = Path(path)
    header: Optional[List[str]] = None
    outcome_index = -1
    samples: List[Sample] = []

    for line, tokens in _read_rows(path, delimiter):
        _check_tokens(tokens, path, line)
        if header is None:
            header = tokens
            if len(set(header)) != len(header):
                duplicate = next(name for name in header if header.count(name) > 1)
                raise DatasetError(f"Duplicate column name '{duplicate}'", path=path, row=line)
            if outcome_column is None:
                outcome_index = len(header) - 1
            elif outcome_column in header:
                outcome_index = header.index(outcome_column)
            else:
                raise MissingOutcomeColumnError(
                    f"Outcome column '{outcome_column}' not found in header {header}", path=path, row=line
                )
            continue

        if len(tokens) != len(header):
            raise RaggedRowError(
                f"Expected {len(header)} tokens, found {len(tokens)}", path=path, row=line, column=len(tokens)
            )
        values = tuple(token for i, token in enumerate(tokens) if i != outcome_index)
        samples.append(Sample(values=values, outcome=tokens[outcome_index]))

    if header is None:
        raise EmptyDatasetError("Dataset file has no header", path=path, row=1)
    if not samples:
        raise EmptyDatasetError("Dataset file has a header but no data rows", path=path, row=2)

    schema = FeatureSchema(
        features=tuple(name for i, name in enumerate(header) if i != outcome_index),
        outcome_column=header[outcome_index],
        labels=tuple(labels),
    )
    logger.info(f"Loaded dataset {path}: {len(samples)} samples, {schema.n_features} features")
    return schema, samples


def write_dataset(schema: FeatureSchema, samples: Sequence[Sample], path: PathLike, delimiter: str = ",") -> None:
    """データセットを出力列を最終列として書き出す"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, delimiter=delimiter, quoting=csv.QUOTE_NONE, lineterminator="\n")
            writer.writerow(list(schema.features) + [schema.outcome_column])
            for sample in samples:
                writer.writerow(list(sample.values) + [sample.outcome])
    except OSError as e:
        raise ReportWriteError(f"Cannot write dataset to {path}: {e}") from e
    logger.info(f"Wrote {len(samples)} samples to {path}")


def load_predictions(path: PathLike, expected_len: int) -> PredictionFile:
    """
    `index,predicted` 形式の予測ファイルを読み込む

    評価分割の各行 [0, expected_len) がちょうど 1 回ずつ含まれている必要がある。
    """
    path = Path(path)
    header_seen = False
    seen: Dict[int, int] = {}
    rows: List[PredictionRow] = []

    for line, tokens in _read_rows(path, ","):
        if not header_seen:
            if tuple(token.lower() for token in tokens) != PREDICTION_HEADER:
                raise PredictionFileError(
                    f"Expected header 'index,predicted', found '{','.join(tokens)}'", path=path, row=line
                )
            header_seen = True
            continue

        if len(tokens) != 2:
            raise RaggedRowError(f"Expected 2 tokens, found {len(tokens)}", path=path, row=line)
        _check_tokens(tokens, path, line)
        try:
            index = int(tokens[0])
        except ValueError:
            raise PredictionFileError(f"Index '{tokens[0]}' is not an integer", path=path, row=line, column=1)
        if not 0 <= index < expected_len:
            raise IndexOutOfRangeError(
                f"Index {index} outside evaluation split [0, {expected_len})", path=path, row=line, column=1
            )
        if index in seen:
            raise DuplicateIndexError(
                f"Index {index} already given on row {seen[index]}", path=path, row=line, column=1
            )
        seen[index] = line
        rows.append(PredictionRow(row_index=index, predicted=tokens[1]))

    if not header_seen:
        raise PredictionFileError("Prediction file has no header", path=path, row=1)
    missing = sorted(set(range(expected_len)) - set(seen))
    if missing:
        preview = ", ".join(str(index) for index in missing[:10])
        raise IncompleteCoverageError(
            f"{len(missing)} evaluation rows have no prediction (index {preview})", path=path, column=1
        )
    logger.info(f"Loaded {len(rows)} predictions from {path}")
    return PredictionFile(rows=tuple(rows))


# ========== レポート ==========

def _sample_payload(evaluation: SampleEvaluation) -> Dict[str, Any]:
    return {
        "predicted": evaluation.predicted,
        "actual": evaluation.actual,
        "p_h": evaluation.probs.p_h,
        "p_p": evaluation.probs.p_p,
        "p_a": evaluation.probs.p_a,
        "d_hp": evaluation.distances.d_hp,
        "d_pa": evaluation.distances.d_pa,
        "d_ha": evaluation.distances.d_ha,
        "case": evaluation.case.value,
        "err_score": evaluation.err_score,
        "score": evaluation.score,
    }


def report_payload(report: EvaluationReport) -> Dict[str, Any]:
    """レポートの JSON 表現（キーは固定）"""
    payload: Dict[str, Any] = {
        "model": report.model,
        "ca": report.ca,
        "rs": report.rs,
        "alpha": report.params.alpha,
        "beta": report.params.beta,
        "rs_alpha_inf": report.rs_alpha_inf,
        "rs_beta_inf": report.rs_beta_inf,
        "n_samples": report.n_samples,
        "cases": {case.value: report.case_histogram.get(case, 0) for case in CaseLabel},
        "shuffles": [shuffle.model_dump() for shuffle in report.shuffles],
        "provenance": report.provenance.model_dump(mode="json"),
    }
    if report.per_sample is not None:
        payload["samples"] = [_sample_payload(evaluation) for evaluation in report.per_sample]
    return payload


def report_from_payload(payload: Dict[str, Any]) -> EvaluationReport:
    samples = payload.get("samples")
    per_sample = None
    if samples is not None:
        per_sample = [
            SampleEvaluation(
                predicted=item["predicted"],
                actual=item["actual"],
                probs={"p_h": item["p_h"], "p_p": item["p_p"], "p_a": item["p_a"]},
                distances={"d_hp": item["d_hp"], "d_pa": item["d_pa"], "d_ha": item["d_ha"]},
                case=item["case"],
                err_score=item["err_score"],
                score=item["score"],
            )
            for item in samples
        ]
    return EvaluationReport(
        model=payload["model"],
        ca=payload["ca"],
        rs=payload["rs"],
        params=RsParams(alpha=payload["alpha"], beta=payload["beta"]),
        rs_alpha_inf=payload["rs_alpha_inf"],
        rs_beta_inf=payload["rs_beta_inf"],
        case_histogram={CaseLabel(case): count for case, count in payload["cases"].items()},
        n_samples=payload["n_samples"],
        shuffles=tuple(ShuffleResult(**shuffle) for shuffle in payload.get("shuffles", [])),
        per_sample=per_sample,
        provenance=Provenance(**payload["provenance"]),
    )


def _flat_report_row(report: EvaluationReport) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "model": report.model,
        "n_samples": report.n_samples,
        "ca": report.ca,
        "rs": report.rs,
        "alpha": report.params.alpha,
        "beta": report.params.beta,
        "rs_alpha_inf": report.rs_alpha_inf,
        "rs_beta_inf": report.rs_beta_inf,
    }
    for case in CaseLabel:
        row[case.value] = report.case_histogram.get(case, 0)
    provenance = report.provenance
    row.update({
        "dataset_digest": provenance.dataset_digest,
        "excluded": ";".join(provenance.excluded),
        "seed": provenance.seed,
        "probability_source": provenance.probability_source.value,
        "unseen_policy": provenance.unseen_policy.value,
        "randomized": provenance.randomized,
    })
    return row


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        raise ReportWriteError(f"Cannot write to {path}: {e}") from e


def _csv_text(rows: Sequence[Dict[str, Any]]) -> str:
    if not rows:
        return ""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def write_report(report: EvaluationReport, path: PathLike, format: ReportFormat = ReportFormat.JSON) -> None:
    """
    評価レポートを書き出す

    JSON が正式な形式。CSV は集計値のみを 1 行に平坦化したもの。
    """
    path = Path(path)
    if format == ReportFormat.JSON:
        text = json.dumps(report_payload(report), indent=2, sort_keys=True) + "\n"
    else:
        text = _csv_text([_flat_report_row(report)])
    _write_text(path, text)
    logger.info(f"Report for {report.model} written to {path}")


def read_report(path: PathLike) -> EvaluationReport:
    """JSON レポートを読み込む"""
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFoundError("Report file not found", path=path)
    return report_from_payload(json.loads(path.read_text(encoding="utf-8")))


def write_table(rows: Sequence[BaseModel], path: PathLike, format: ReportFormat = ReportFormat.JSON) -> None:
    """スイープ・上下限などの表を列形式で書き出す"""
    path = Path(path)
    records = [row.model_dump(mode="json") for row in rows]
    if format == ReportFormat.JSON:
        text = json.dumps(records, indent=2, sort_keys=True) + "\n"
    else:
        text = _csv_text(records)
    _write_text(path, text)
    logger.info(f"Table with {len(records)} rows written to {path}")
