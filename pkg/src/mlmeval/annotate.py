"""Human category judgments over cloze and generation outputs.

One judgment is one record: an item id, the task it came from, a category
from that task's fixed set, the annotator, and a timestamp. Collection is an
interactive terminal loop over rendered items; persistence is append-only
JSONL; tabulation turns a record multiset into per-group percentage rows with
exact rational arithmetic, rounding only at the formatting step.

Items are presented without model identity. The tabulation step receives an
external item id to (language, model) mapping, so the annotator never sees
which model produced an item.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import IO, Callable, Mapping

logger = logging.getLogger(__name__)

CLOZE = "CLOZE"
GENERATION = "GENERATION"

# Key 1..4 maps to the task's categories in this order.
CATEGORIES: dict[str, tuple[str, ...]] = {
    CLOZE: ("match", "mismatch", "copy", "gibberish"),
    GENERATION: ("on-topic", "off-topic", "copy", "gibberish"),
}

SKIP_KEY = "s"
QUIT_KEY = "q"
DEFAULT_ANNOTATOR = "anonymous"


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class AnnotationRecord:
    item_id: str
    task: str
    category: str
    annotator: str
    timestamp: str

    def __post_init__(self):
        if self.task not in CATEGORIES:
            raise ValueError(f"unknown task {self.task!r}, expected one of {sorted(CATEGORIES)}")
        if self.category not in CATEGORIES[self.task]:
            raise ValueError(
                f"category {self.category!r} not valid for {self.task}: {CATEGORIES[self.task]}"
            )
        if not self.item_id:
            raise ValueError("item_id must be non-empty")
        if not self.annotator:
            raise ValueError("annotator must be non-empty")
        try:
            datetime.datetime.fromisoformat(self.timestamp)
        except ValueError:
            raise ValueError(f"timestamp {self.timestamp!r} is not ISO-8601") from None


@dataclass(frozen=True)
class RenderableItem:
    """One thing to judge: the rendered text only, no model identity."""

    item_id: str
    task: str
    text: str

    def __post_init__(self):
        if self.task not in CATEGORIES:
            raise ValueError(f"unknown task {self.task!r}, expected one of {sorted(CATEGORIES)}")


def annotate_session(items: list[RenderableItem], prior: list[AnnotationRecord],
                     input_stream: IO[str], output_stream: IO[str],
                     annotator: str = DEFAULT_ANNOTATOR,
                     now: Callable[[], str] = _utc_now) -> list[AnnotationRecord]:
    """Prompt for a category per unannotated item; returns the new records.

    Keys 1..4 pick the task's categories in order, `s` skips, `q` (or a
    closed input stream) ends the session; whatever was collected so far is
    returned either way. Items already judged by this annotator are skipped.
    """
    done = {(r.item_id, r.annotator) for r in prior}
    collected: list[AnnotationRecord] = []
    for item in items:
        if (item.item_id, annotator) in done:
            continue
        categories = CATEGORIES[item.task]
        menu = "  ".join(f"[{i}] {c}" for i, c in enumerate(categories, start=1))
        print(f"\n{item.text}", file=output_stream)
        while True:
            print(f"{menu}  [{SKIP_KEY}] skip  [{QUIT_KEY}] save and quit", file=output_stream)
            line = input_stream.readline()
            if line == "":  # input closed under us: save what we have
                return collected
            key = line.strip()
            if key == QUIT_KEY:
                return collected
            if key == SKIP_KEY:
                break
            if key in {"1", "2", "3", "4"}:
                record = AnnotationRecord(
                    item_id=item.item_id,
                    task=item.task,
                    category=categories[int(key) - 1],
                    annotator=annotator,
                    timestamp=now(),
                )
                collected.append(record)
                done.add((item.item_id, annotator))
                break
            print(f"unrecognized key {key!r}", file=output_stream)
    return collected


def load_records(path: str | Path) -> list[AnnotationRecord]:
    """Read a JSONL record store; a duplicated (item_id, annotator) pair means
    the store is corrupt and raises."""
    path = Path(path)
    records: list[AnnotationRecord] = []
    seen: set[tuple[str, str]] = set()
    if not path.exists():
        return records
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = AnnotationRecord(**json.loads(line))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad record: {exc}") from None
            key = (record.item_id, record.annotator)
            if key in seen:
                raise ValueError(f"{path}:{line_no}: duplicate record for {key}")
            seen.add(key)
            records.append(record)
    return records


def append_records(path: str | Path, records: list[AnnotationRecord]) -> None:
    """Append new records to the JSONL store; existing lines are never
    touched. Raises on any (item_id, annotator) collision."""
    path = Path(path)
    seen = {(r.item_id, r.annotator) for r in load_records(path)}
    for record in records:
        key = (record.item_id, record.annotator)
        if key in seen:
            raise ValueError(f"record for {key} already stored in {path}")
        seen.add(key)
    with open(path, "a", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(dataclasses.asdict(record), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class TableRow:
    """One (task, language, model) group: exact category percentages in the
    task's category order, plus their formatted renderings."""

    task: str
    language: str
    model: str
    n: int
    exact: tuple[Fraction, ...]
    formatted: tuple[str, ...]

    @property
    def categories(self) -> tuple[str, ...]:
        return CATEGORIES[self.task]


def round_half_up(x: Fraction, precision: int = 0) -> Fraction:
    scale = Fraction(10) ** precision
    return Fraction(math.floor(x * scale + Fraction(1, 2)), 1) / scale


def format_percent(x: Fraction, precision: int = 0) -> str:
    scaled = int(round_half_up(x, precision) * 10**precision)
    digits = str(scaled).rjust(precision + 1, "0")
    if precision == 0:
        return digits
    return f"{digits[:-precision]}.{digits[-precision:]}"


def tabulate(records: list[AnnotationRecord], groups: Mapping[str, tuple[str, str]],
             precision: int = 0) -> list[TableRow]:
    """Percentage rows per (task, language, model) group.

    ``groups`` maps item_id to its (language, model) pair; this is where
    model identity re-enters after blind annotation. Records without a group
    are dropped with a warning, as are groups named in the mapping that end
    up with no records. Within a group the exact percentages always sum to
    100; rounding happens only in the formatted strings.
    """
    counts: dict[tuple[str, str, str], dict[str, int]] = {}
    grouped_total = 0
    for record in records:
        if record.item_id not in groups:
            logger.warning("record for item %s has no group assignment, dropped", record.item_id)
            continue
        language, model = groups[record.item_id]
        key = (record.task, language, model)
        per_cat = counts.setdefault(key, {c: 0 for c in CATEGORIES[record.task]})
        per_cat[record.category] += 1
        grouped_total += 1

    named = {(language, model) for language, model in groups.values()}
    used = {(language, model) for _, language, model in counts}
    for group in sorted(named - used):
        logger.warning("group %s has no records, omitted", group)

    rows = []
    for (task, language, model) in sorted(counts):
        per_cat = counts[(task, language, model)]
        n = sum(per_cat.values())
        exact = tuple(Fraction(per_cat[c] * 100, n) for c in CATEGORIES[task])
        formatted = tuple(format_percent(x, precision) for x in exact)
        rows.append(TableRow(task=task, language=language, model=model, n=n,
                             exact=exact, formatted=formatted))
    return rows


def _split_by_task(rows: list[TableRow]) -> list[tuple[str, list[TableRow]]]:
    by_task: dict[str, list[TableRow]] = {}
    for row in rows:
        by_task.setdefault(row.task, []).append(row)
    return sorted(by_task.items())


def format_tsv(rows: list[TableRow]) -> str:
    """One TSV block per task: header row, then language/model/N/percentages."""
    blocks = []
    for task, task_rows in _split_by_task(rows):
        header = "\t".join(["task", "language", "model", "n", *CATEGORIES[task]])
        lines = [header]
        for row in task_rows:
            lines.append("\t".join([row.task, row.language, row.model, str(row.n),
                                    *row.formatted]))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def format_text(rows: list[TableRow]) -> str:
    """Space-aligned rendering of the same tables for terminal reading."""
    blocks = []
    for task, task_rows in _split_by_task(rows):
        table = [["language", "model", "n", *CATEGORIES[task]]]
        for row in task_rows:
            table.append([row.language, row.model, str(row.n), *row.formatted])
        widths = [max(len(line[i]) for line in table) for i in range(len(table[0]))]
        lines = [task]
        for line in table:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
