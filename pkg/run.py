#!/usr/bin/env python3
"""
RelevanceScore 評価ツールの起動スクリプト
"""

import sys

from main import main as cli_main


def main():
    """CLI を起動"""
    try:
        sys.exit(cli_main(sys.argv[1:]))
    except KeyboardInterrupt:
        print("\n👋 中断しました")
        sys.exit(1)


if __name__ == "__main__":
    main()
