"""
RelevanceScore ツールキットの例外定義

終了コード: 0 成功, 1 設定エラー, 2 データエラー, 3 内部不変条件違反
"""
from typing import Optional


class RelevanceError(Exception):
    """全ての例外の基底クラス"""

    exit_code = 1

    def __init__(self, message: str, model: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.model = model

    def __str__(self) -> str:
        if self.model:
            return f"[{self.model}] {self.message}"
        return self.message


class ConfigurationError(RelevanceError):
    exit_code = 1


class DataError(RelevanceError):
    exit_code = 2


class InvariantViolationError(RelevanceError):
    exit_code = 3


# ========== 設定エラー ==========

class InvalidParametersError(ConfigurationError, ValueError):
    """α+β=0 など、ErrScore が定義できないパラメータ"""


class UnknownFeatureError(ConfigurationError, KeyError):
    def __init__(self, feature: str, known):
        super().__init__(f"Unknown feature '{feature}' in exclusion set; known features: {list(known)}")
        self.feature = feature


class SchemaError(ConfigurationError):
    pass


# ========== データエラー ==========

class DatasetError(DataError):
    """データセット読み込みエラー（行・列の位置を保持）"""

    def __init__(self, message: str, path=None, row: Optional[int] = None, column: Optional[int] = None):
        locus = []
        if path is not None:
            locus.append(str(path))
        if row is not None:
            locus.append(f"row {row}")
        if column is not None:
            locus.append(f"column {column}")
        full = f"{message} ({', '.join(locus)})" if locus else message
        super().__init__(full)
        self.path = path
        self.row = row
        self.column = column


class DatasetNotFoundError(DatasetError, FileNotFoundError):
    pass


class RaggedRowError(DatasetError):
    pass


class MissingOutcomeColumnError(DatasetError):
    pass


class EmptyDatasetError(DatasetError):
    pass


class EmptyTokenError(DatasetError):
    pass


class PredictionFileError(DatasetError):
    pass


class DuplicateIndexError(PredictionFileError):
    pass


class IndexOutOfRangeError(PredictionFileError):
    pass


class IncompleteCoverageError(PredictionFileError):
    pass


class EmptyEvaluationError(DataError, ValueError):
    pass


class LengthMismatchError(DataError, ValueError):
    pass


class MissingDistributionError(DataError, KeyError):
    pass


class SplitError(DataError, ValueError):
    pass


class ReportWriteError(DataError, OSError):
    pass


class ArityMismatchError(DataError, ValueError):
    pass
