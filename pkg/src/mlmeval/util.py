"""Small shared helpers: seed derivation and JSONL IO."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(run_seed: int, index: int) -> int:
    """Mix a run seed and a stable item index into an independent child seed.

    Two rounds of splitmix64, so child seeds never depend on scheduling or
    wall clock; identical (run_seed, index) always give the same value.
    """
    return _splitmix64(_splitmix64(run_seed & _MASK64) ^ (index & _MASK64))


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
