import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    # RelevanceScore パラメータ（α: d_HP の重み, β: d_PA の重み）
    DEFAULT_ALPHA = float(os.getenv("RS_ALPHA", 2.0))
    DEFAULT_BETA = float(os.getenv("RS_BETA", 1.0))

    # 確率の等値判定に使う絶対許容誤差
    PROBABILITY_TOLERANCE = float(os.getenv("RS_PROBABILITY_TOLERANCE", 1e-9))

    # 学習/テスト分割
    TRAIN_FRACTION = float(os.getenv("RS_TRAIN_FRACTION", 0.7))
    SHUFFLE_COUNT = int(os.getenv("RS_SHUFFLE_COUNT", 10))
    SEED = int(os.getenv("RS_SEED", 0))

    # 確率テーブルの構築元と未知コンテキストの扱い
    PROBABILITY_SOURCE = os.getenv("RS_PROBABILITY_SOURCE", "full")
    UNSEEN_POLICY = os.getenv("RS_UNSEEN_POLICY", "uniform")

    # データセットファイル
    DELIMITER = os.getenv("RS_DELIMITER", ",")

    # α/β スイープ
    SWEEP_PAIRS = os.getenv("RS_SWEEP_PAIRS", "1:2,1:1,2:1")

    # 極限の数値確認に使う重みと許容誤差
    LIMIT_WEIGHT = 1e6
    LIMIT_TOLERANCE = 1e-3

    # ランダム出力テストの CA 許容幅（標準誤差の倍数）
    CA_BAND_STANDARD_ERRORS = 3.0

    # Application Settings
    WORKERS = int(os.getenv("RS_WORKERS", 1))
    LOG_LEVEL = os.getenv("RS_LOG_LEVEL", "INFO").upper()

    # File paths
    OUTPUT_DIR = os.getenv("RS_OUTPUT_DIR", "outputs")
