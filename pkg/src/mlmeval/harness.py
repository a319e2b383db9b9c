"""Run orchestration: configs, backend construction, run directories, reports.

A run executes one task (probe, cloze, or generate) against one backend and
leaves a self-describing directory behind:

    config.json   the exact resolved RunConfig (reproducibility manifest)
    items.jsonl   one JSON record per item the task processed
    metrics.json  the task's aggregate numbers
    log.txt       module log output for the run

An ``incomplete`` marker exists while the run is in flight and stays behind
if it dies, so partial artifacts are never mistaken for finished ones. All
derived randomness comes from (run seed, stable item index), never from wall
clock, and config/items/metrics bytes are reproducible for identical configs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import shlex
from dataclasses import dataclass
from pathlib import Path

from mlmeval import annotate as annotate_mod
from mlmeval import cloze as cloze_mod
from mlmeval import generate as generate_mod
from mlmeval import probe as probe_mod
from mlmeval.conllu import Sentence, filter_sentences, parse_conllu_file
from mlmeval.errors import SequenceTooLongError
from mlmeval.scorer.backend import Backend
from mlmeval.scorer.toy import CharPieceBackend, EchoBackend, UnigramBackend
from mlmeval.scorer.wire import HttpTransport, StdioTransport, WireBackend
from mlmeval.util import derive_seed, read_jsonl, write_jsonl

logger = logging.getLogger(__name__)

BACKEND_ENV_VAR = "MLMEVAL_BACKEND"
COMPUTE_TASKS = ("probe", "cloze", "generate")

CONFIG_FILE = "config.json"
ITEMS_FILE = "items.jsonl"
METRICS_FILE = "metrics.json"
LOG_FILE = "log.txt"
MODEL_FILE = "model.json"
INCOMPLETE_MARKER = "incomplete"


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; the resolved copy is written into the run dir.

    ``language`` and ``model`` are labels carried into metrics for report
    grouping; they never influence computation.
    """

    task: str
    out: str
    backend: str = ""
    train: str | None = None
    test: str | None = None
    seed: int = 0
    language: str = ""
    model: str = ""
    # sentence length filter (token count bounds, inclusive)
    min_tokens: int = 5
    max_tokens: int = 50
    # cloze
    mask_rate: float = cloze_mod.DEFAULT_MASK_RATE
    k: int = 1
    # probe
    epochs: int = probe_mod.DEFAULT_EPOCHS
    learning_rate: float = probe_mod.DEFAULT_LEARNING_RATE
    batch_size: int = probe_mod.DEFAULT_BATCH_SIZE
    cap: int = probe_mod.DEFAULT_CAP
    # generate
    n_docs: int = generate_mod.DEFAULT_N_DOCS
    per_doc: int = generate_mod.DEFAULT_PER_DOC
    max_iterations: int = generate_mod.DEFAULT_MAX_ITERATIONS
    burn_in: int = generate_mod.DEFAULT_BURN_IN
    top_k: int = generate_mod.DEFAULT_TOP_K
    temperature: float = generate_mod.DEFAULT_TEMPERATURE

    def __post_init__(self):
        if self.task not in COMPUTE_TASKS:
            raise ValueError(f"task must be one of {COMPUTE_TASKS}, got {self.task!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        payload = self.to_dict()
        del payload["out"]  # identity must survive relocation of the run dir
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]


def make_backend(spec: str, corpus: list[Sentence]) -> Backend:
    """Build a backend from its spec string.

    ``toy-echo`` / ``toy-unigram`` / ``toy-char`` construct in-process toys
    over the given corpus; ``wire:<http url>`` speaks the wire protocol over
    HTTP and ``wire:<command line>`` over a child process's stdio. An empty
    spec falls back to the environment variable given in BACKEND_ENV_VAR.
    """
    spec = spec or os.environ.get(BACKEND_ENV_VAR, "")
    if not spec:
        raise ValueError(f"no backend given (use --backend or {BACKEND_ENV_VAR})")
    if spec == "toy-echo":
        return EchoBackend(corpus)
    if spec == "toy-unigram":
        return UnigramBackend(corpus)
    if spec == "toy-char":
        return CharPieceBackend(corpus)
    if spec.startswith("wire:"):
        target = spec[len("wire:"):]
        if target.startswith(("http://", "https://")):
            return WireBackend(HttpTransport(target))
        return WireBackend(StdioTransport(shlex.split(target)))
    raise ValueError(f"unknown backend spec {spec!r}")


def item_id(config: RunConfig, sent_id: str, index: int) -> str:
    """Stable hash naming one item of one run; reveals nothing about the
    model, so annotation stays blind."""
    blob = f"{config.task}|{sent_id}|{config.digest()}|{index}"
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_treebank(path: str | None, flag: str):
    if not path:
        raise ValueError(f"this task needs {flag}")
    return parse_conllu_file(path)


def run(config: RunConfig) -> Path:
    """Execute one task end-to-end into its run directory.

    Exceptions propagate to the caller after logging; the ``incomplete``
    marker is removed only on success.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / INCOMPLETE_MARKER
    marker.write_text("run in progress or aborted\n", encoding="utf-8")
    _write_json(out / CONFIG_FILE, config.to_dict())

    handler = logging.FileHandler(out / LOG_FILE, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    root = logging.getLogger("mlmeval")
    previous_level = root.level
    if root.getEffectiveLevel() > logging.INFO:
        root.setLevel(logging.INFO)  # log.txt should capture progress lines
    root.addHandler(handler)
    try:
        if config.task == "probe":
            _run_probe(config, out)
        elif config.task == "cloze":
            _run_cloze(config, out)
        elif config.task == "generate":
            _run_generate(config, out)
        else:  # __post_init__ makes this unreachable
            raise ValueError(f"unknown task {config.task!r}")
    except Exception:
        logger.exception("run failed; artifacts in %s are incomplete", out)
        raise
    finally:
        root.removeHandler(handler)
        handler.close()
        root.setLevel(previous_level)
    marker.unlink()
    return out


def _run_probe(config: RunConfig, out: Path) -> None:
    train_tb = _load_treebank(config.train, "--train")
    test_tb = _load_treebank(config.test, "--test")
    # toy backends build their vocabulary from this corpus; cover both splits
    # so unseen test words do not all collapse onto the UNK embedding
    corpus = list(train_tb.sentences()) + list(test_tb.sentences())
    with make_backend(config.backend, corpus) as backend:
        train_instances = probe_mod.extract_aux_instances(train_tb, backend, config.language)
        test_instances = probe_mod.extract_aux_instances(test_tb, backend, config.language)
    if not train_instances or not test_instances:
        raise ValueError(
            f"no auxiliary instances extracted (train {len(train_instances)}, "
            f"test {len(test_instances)})"
        )
    logger.info("probe instances: %d train, %d test", len(train_instances), len(test_instances))

    capped = probe_mod.cap_train_set(train_instances, config.cap, seed=derive_seed(config.seed, 0))
    model = probe_mod.train_probe(
        capped,
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        seed=derive_seed(config.seed, 1),
    )
    predicted = probe_mod.predict_labels(model, test_instances)
    accuracy = probe_mod.evaluate_probe(model, test_instances)
    baseline = probe_mod.majority_baseline(test_instances)

    records = []
    for index, (inst, pred) in enumerate(zip(test_instances, predicted)):
        records.append({
            "item_id": item_id(config, inst.source.sent_id, index),
            "sent_id": inst.source.sent_id,
            "token_id": inst.source.token_id,
            "subword_offset": inst.source.subword_offset,
            "label": inst.label,
            "predicted": pred,
        })
    write_jsonl(out / ITEMS_FILE, records)
    probe_mod.save_model(model, out / MODEL_FILE)
    _write_json(out / METRICS_FILE, {
        "task": "probe",
        "language": config.language,
        "model": config.model,
        "accuracy": accuracy,
        "baseline": baseline,
        "n": len(test_instances),
        "n_train": len(capped),
    })


def _run_cloze(config: RunConfig, out: Path) -> None:
    treebank = _load_treebank(config.train, "--train")
    sentences = filter_sentences(treebank, config.min_tokens, config.max_tokens)
    if not sentences:
        raise ValueError("no sentences left after the length filter")
    logger.info("cloze over %d sentences", len(sentences))

    records = []
    items = []
    with make_backend(config.backend, list(treebank.sentences())) as backend:
        for index, sentence in enumerate(sentences):
            seed = derive_seed(config.seed, index)
            indices = cloze_mod.select_mask_words(sentence, config.mask_rate, seed)
            try:
                item = cloze_mod.build_cloze_item(sentence, indices, backend, rng_seed=seed)
            except SequenceTooLongError as exc:
                logger.info("skipping %s: %s", sentence.sent_id, exc)
                continue
            item = cloze_mod.predict_cloze(item, backend, k=config.k)
            items.append(item)
            records.append({
                "item_id": item_id(config, sentence.sent_id, index),
                "sent_id": item.sent_id,
                "task": annotate_mod.CLOZE,
                "masked_word_indices": list(item.masked_word_indices),
                "masked_positions": list(item.masked_positions),
                "gold": list(item.gold),
                "predictions": list(item.predictions),
                "rendered": cloze_mod.render_cloze(item, backend),
                "rng_seed": seed,
            })
    if not items:
        raise ValueError("every sentence was skipped; nothing to score")
    write_jsonl(out / ITEMS_FILE, records)
    _write_json(out / METRICS_FILE, {
        "task": "cloze",
        "language": config.language,
        "model": config.model,
        "subword_accuracy": cloze_mod.cloze_accuracy(items),
        "n_masked": sum(i.n_masked for i in items),
        "n_items": len(items),
    })


def _run_generate(config: RunConfig, out: Path) -> None:
    treebank = _load_treebank(config.train, "--train")
    with make_backend(config.backend, list(treebank.sentences())) as backend:
        tasks = generate_mod.sample_tasks(
            treebank, backend, n_docs=config.n_docs, per_doc=config.per_doc, seed=config.seed
        )
        if not tasks:
            raise ValueError("no generation slots sampled (documents too small?)")
        logger.info("generating %d windows", len(tasks))
        records = []
        n_converged = 0
        total_iterations = 0
        for index, task in enumerate(tasks):
            result = generate_mod.gibbs_generate(
                task,
                backend,
                max_iterations=config.max_iterations,
                burn_in=config.burn_in,
                top_k=config.top_k,
                temperature=config.temperature,
            )
            n_converged += result.converged
            total_iterations += result.iterations_used
            records.append({
                "item_id": item_id(config, task.sent_id, index),
                "task": annotate_mod.GENERATION,
                "doc_id": task.doc_id,
                "sent_id": task.sent_id,
                "original_text": task.original_text,
                "left_text": task.left_text,
                "right_text": task.right_text,
                "window_len": task.window_len,
                "rng_seed": task.rng_seed,
                "window_ids": list(result.window_ids),
                "text": result.text,
                "iterations_used": result.iterations_used,
                "converged": result.converged,
                "parameters": {
                    "max_iterations": config.max_iterations,
                    "burn_in": config.burn_in,
                    "top_k": config.top_k,
                    "temperature": config.temperature,
                },
                "rendered": generate_mod.render_context_sheet(task, result),
            })
    write_jsonl(out / ITEMS_FILE, records)
    _write_json(out / METRICS_FILE, {
        "task": "generate",
        "language": config.language,
        "model": config.model,
        "n_tasks": len(records),
        "n_converged": n_converged,
        "mean_iterations": total_iterations / len(records),
    })


def load_run_metrics(run_dir: str | Path) -> dict | None:
    path = Path(run_dir) / METRICS_FILE
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def load_run_config(run_dir: str | Path) -> dict | None:
    path = Path(run_dir) / CONFIG_FILE
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def renderable_items(run_dir: str | Path) -> list[annotate_mod.RenderableItem]:
    """The run's items as blind annotation units (rendered text only)."""
    config = load_run_config(run_dir)
    if config is None:
        raise ValueError(f"{run_dir} has no {CONFIG_FILE}")
    task = {"cloze": annotate_mod.CLOZE, "generate": annotate_mod.GENERATION}.get(config["task"])
    if task is None:
        raise ValueError(f"task {config['task']!r} produces nothing to annotate")
    items = []
    for record in read_jsonl(Path(run_dir) / ITEMS_FILE):
        items.append(annotate_mod.RenderableItem(
            item_id=record["item_id"], task=task, text=record["rendered"]
        ))
    return items


def annotation_groups(run_dirs: list[str | Path]) -> dict[str, tuple[str, str]]:
    """item_id -> (language, model) across runs, for tabulation after blind
    annotation. Model identity comes from each run's config, never from the
    items themselves."""
    groups: dict[str, tuple[str, str]] = {}
    for run_dir in run_dirs:
        config = load_run_config(run_dir)
        if config is None or config["task"] not in ("cloze", "generate"):
            continue
        items_path = Path(run_dir) / ITEMS_FILE
        if not items_path.exists():
            continue
        for record in read_jsonl(items_path):
            groups[record["item_id"]] = (config["language"], config["model"])
    return groups


def _percent(value: float) -> str:
    return f"{value * 100:.2f}"


@dataclass
class Report:
    probe_rows: list[dict]
    cloze_rows: list[dict]
    warnings: list[str]
    annotation_rows: list = dataclasses.field(default_factory=list)


def emit_report(run_dirs: list[str | Path], records: list | None = None,
                precision: int = 0) -> Report:
    """Collect metrics across runs into report rows.

    Probe runs become (language, model, test accuracy, baseline) rows; cloze
    runs become a language-by-model accuracy grid. Runs without metrics are
    skipped with a warning. When annotation records are given, they are
    tabulated against the runs' item groups as well.
    """
    warnings: list[str] = []
    probe_rows: list[dict] = []
    cloze_rows: list[dict] = []
    if not run_dirs:
        warnings.append("no run directories given")
    for run_dir in run_dirs:
        metrics = load_run_metrics(run_dir)
        if metrics is None:
            warnings.append(f"{run_dir}: no {METRICS_FILE}, row skipped")
            continue
        if (Path(run_dir) / INCOMPLETE_MARKER).exists():
            warnings.append(f"{run_dir}: marked incomplete, row skipped")
            continue
        task = metrics.get("task")
        if task == "probe":
            probe_rows.append({
                "language": metrics["language"],
                "model": metrics["model"],
                "accuracy": metrics["accuracy"],
                "baseline": metrics["baseline"],
                "n": metrics["n"],
            })
        elif task == "cloze":
            cloze_rows.append({
                "language": metrics["language"],
                "model": metrics["model"],
                "subword_accuracy": metrics["subword_accuracy"],
                "n_masked": metrics["n_masked"],
            })
        elif task == "generate":
            pass  # generation has no accuracy table; its outputs go to annotation
        else:
            warnings.append(f"{run_dir}: unknown task {task!r}, row skipped")

    report = Report(probe_rows=probe_rows, cloze_rows=cloze_rows, warnings=warnings)
    if records:
        groups = annotation_groups(run_dirs)
        report.annotation_rows = annotate_mod.tabulate(records, groups, precision=precision)
    for message in warnings:
        logger.warning("%s", message)
    return report


def format_report_tsv(report: Report) -> str:
    lines: list[str] = []
    if report.probe_rows:
        lines.append("language\tmodel\ttest_acc\tbaseline\tn")
        for row in sorted(report.probe_rows, key=lambda r: (r["language"], r["model"])):
            lines.append("\t".join([
                row["language"], row["model"],
                _percent(row["accuracy"]), _percent(row["baseline"]), str(row["n"]),
            ]))
        lines.append("")
    if report.cloze_rows:
        models = sorted({row["model"] for row in report.cloze_rows})
        lines.append("\t".join(["language", *models]))
        by_lang: dict[str, dict[str, float]] = {}
        for row in sorted(report.cloze_rows, key=lambda r: (r["language"], r["model"])):
            by_lang.setdefault(row["language"], {})[row["model"]] = row["subword_accuracy"]
        for language in sorted(by_lang):
            cells = [by_lang[language].get(m) for m in models]
            lines.append("\t".join(
                [language, *("" if c is None else _percent(c) for c in cells)]
            ))
        lines.append("")
    if report.annotation_rows:
        lines.append(annotate_mod.format_tsv(report.annotation_rows).rstrip("\n"))
        lines.append("")
    return "\n".join(lines)


def format_report_text(report: Report) -> str:
    blocks: list[str] = []
    if report.probe_rows:
        table = [["language", "model", "test acc.", "baseline", "n"]]
        for row in sorted(report.probe_rows, key=lambda r: (r["language"], r["model"])):
            table.append([row["language"], row["model"], _percent(row["accuracy"]),
                          _percent(row["baseline"]), str(row["n"])])
        blocks.append(_align(table, title="probe"))
    if report.cloze_rows:
        models = sorted({row["model"] for row in report.cloze_rows})
        by_lang: dict[str, dict[str, float]] = {}
        for row in report.cloze_rows:
            by_lang.setdefault(row["language"], {})[row["model"]] = row["subword_accuracy"]
        table = [["language", *models]]
        for language in sorted(by_lang):
            table.append([language, *(
                "" if by_lang[language].get(m) is None else _percent(by_lang[language][m])
                for m in models
            )])
        blocks.append(_align(table, title="cloze"))
    if report.annotation_rows:
        blocks.append(annotate_mod.format_text(report.annotation_rows).rstrip("\n"))
    if report.warnings:
        blocks.append("\n".join(f"warning: {w}" for w in report.warnings))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def _align(table: list[list[str]], title: str) -> str:
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    lines = [title]
    for row in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines)
