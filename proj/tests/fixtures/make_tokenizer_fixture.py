#!/usr/bin/env python3
"""Freezes reference token ids from the `tokenizers` package into tokenizer_ids.json."""

import json
import sys
from pathlib import Path

from tokenizers import Tokenizer

HERE = Path(__file__).parent
TEXTS = [
    "refactor the legacy cache module",
    "Hello, world!  It's   a test's 123 4567 'll 've",
    "  leading and trailing spaces  ",
    "tabs\tand\nnewlines\r\nmixed",
    "café naïve résumé — “quotes” ü",
    "日本語のテキスト and 한국어",
    "emoji 🚀🔥 inside text",
    "<s> special </s> tokens <pad> in text",
    "",
    "a" * 40,
    " ".join(["debt"] * 700),
]
MAX_LENGTHS = [512, 16]


def main():
    tok_path = Path(sys.argv[1]) if len(sys.argv) > 1 else HERE / "exported" / "td" / "tokenizer.json"
    tok = Tokenizer.from_file(str(tok_path))
    rows = []
    for max_len in MAX_LENGTHS:
        tok.enable_truncation(max_length=max_len, strategy="longest_first", direction="right")
        for t in TEXTS:
            rows.append({"text": t, "max_length": max_len, "ids": tok.encode(t).ids})
    (HERE / "tokenizer_ids.json").write_text(json.dumps(rows, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
