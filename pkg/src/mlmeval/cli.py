"""Command-line entry point.

Subcommands ``probe``, ``cloze``, and ``generate`` execute one evaluation run
into a run directory; ``annotate`` opens an interactive judgment session over
a run's items; ``report`` assembles accuracy and annotation tables across run
directories. Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from mlmeval import annotate as annotate_mod
from mlmeval import harness

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this interface reserves 2 for
    runtime failures and uses 1 for usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_run_flags(parser: argparse.ArgumentParser, needs_test: bool = False) -> None:
    parser.add_argument("--train", required=True, help="CoNLL-U treebank path")
    if needs_test:
        parser.add_argument("--test", required=True, help="CoNLL-U treebank path for evaluation")
    parser.add_argument(
        "--backend", default="",
        help="toy-echo | toy-unigram | toy-char | wire:<url or command> "
             f"(default: ${harness.BACKEND_ENV_VAR})",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="run directory to create")
    parser.add_argument("--language", default="", help="label recorded in metrics")
    parser.add_argument("--model", default="", help="label recorded in metrics")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="mlmeval",
        description="Masked language model evaluation over CoNLL-U treebanks: "
                    "auxiliary probe, cloze test, Gibbs generation, and human "
                    "judgment tooling.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("probe", help="train and evaluate the main-auxiliary classifier")
    _add_run_flags(p, needs_test=True)
    p.add_argument("--epochs", type=int, default=harness.RunConfig.epochs)
    p.add_argument("--learning-rate", type=float, default=harness.RunConfig.learning_rate)
    p.add_argument("--batch-size", type=int, default=harness.RunConfig.batch_size)
    p.add_argument("--cap", type=int, default=harness.RunConfig.cap,
                   help="maximum training instances")
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("cloze", help="masked-word prediction accuracy")
    _add_run_flags(p)
    p.add_argument("--mask-rate", type=float, default=harness.RunConfig.mask_rate)
    p.add_argument("--k", type=int, default=harness.RunConfig.k,
                   help="candidates requested per masked position")
    p.add_argument("--min-tokens", type=int, default=harness.RunConfig.min_tokens)
    p.add_argument("--max-tokens", type=int, default=harness.RunConfig.max_tokens)
    p.set_defaults(func=_cmd_cloze)

    p = sub.add_parser("generate", help="fill context windows by Gibbs sampling")
    _add_run_flags(p)
    p.add_argument("--n-docs", type=int, default=harness.RunConfig.n_docs)
    p.add_argument("--per-doc", type=int, default=harness.RunConfig.per_doc)
    p.add_argument("--max-iterations", type=int, default=harness.RunConfig.max_iterations)
    p.add_argument("--burn-in", type=int, default=harness.RunConfig.burn_in)
    p.add_argument("--top-k", type=int, default=harness.RunConfig.top_k)
    p.add_argument("--temperature", type=float, default=harness.RunConfig.temperature)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("annotate", help="judge a run's outputs interactively")
    p.add_argument("--items", required=True, help="run directory whose items to judge")
    p.add_argument("--records", required=True, help="JSONL judgment store (appended)")
    p.add_argument("--annotator", default=annotate_mod.DEFAULT_ANNOTATOR)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("report", help="tabulate metrics and judgments across runs")
    p.add_argument("run_dirs", nargs="*", metavar="RUN_DIR")
    p.add_argument("--records", default="", help="JSONL judgment store to tabulate")
    p.add_argument("--precision", type=int, default=0,
                   help="decimal places for judgment percentages")
    p.add_argument("--out", default="", help="directory for report.tsv / report.txt")
    p.set_defaults(func=_cmd_report)

    return parser


def _cmd_probe(args: argparse.Namespace) -> int:
    config = harness.RunConfig(
        task="probe", out=args.out, backend=args.backend, train=args.train,
        test=args.test, seed=args.seed, language=args.language, model=args.model,
        epochs=args.epochs, learning_rate=args.learning_rate,
        batch_size=args.batch_size, cap=args.cap,
    )
    run_dir = harness.run(config)
    metrics = harness.load_run_metrics(run_dir)
    print(f"{run_dir}: accuracy {metrics['accuracy']:.4f} "
          f"baseline {metrics['baseline']:.4f} n {metrics['n']}")
    return EXIT_OK


def _cmd_cloze(args: argparse.Namespace) -> int:
    config = harness.RunConfig(
        task="cloze", out=args.out, backend=args.backend, train=args.train,
        seed=args.seed, language=args.language, model=args.model,
        mask_rate=args.mask_rate, k=args.k,
        min_tokens=args.min_tokens, max_tokens=args.max_tokens,
    )
    run_dir = harness.run(config)
    metrics = harness.load_run_metrics(run_dir)
    print(f"{run_dir}: subword_accuracy {metrics['subword_accuracy']:.4f} "
          f"over {metrics['n_masked']} masked subwords")
    return EXIT_OK


def _cmd_generate(args: argparse.Namespace) -> int:
    config = harness.RunConfig(
        task="generate", out=args.out, backend=args.backend, train=args.train,
        seed=args.seed, language=args.language, model=args.model,
        n_docs=args.n_docs, per_doc=args.per_doc,
        max_iterations=args.max_iterations, burn_in=args.burn_in,
        top_k=args.top_k, temperature=args.temperature,
    )
    run_dir = harness.run(config)
    metrics = harness.load_run_metrics(run_dir)
    print(f"{run_dir}: {metrics['n_converged']}/{metrics['n_tasks']} windows converged, "
          f"mean {metrics['mean_iterations']:.1f} iterations")
    return EXIT_OK


def _cmd_annotate(args: argparse.Namespace) -> int:
    items = harness.renderable_items(args.items)
    prior = annotate_mod.load_records(args.records)
    new_records = annotate_mod.annotate_session(
        items, prior, sys.stdin, sys.stdout, annotator=args.annotator
    )
    annotate_mod.append_records(args.records, new_records)
    print(f"saved {len(new_records)} new records to {args.records}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    records = annotate_mod.load_records(args.records) if args.records else None
    report = harness.emit_report(args.run_dirs, records=records, precision=args.precision)
    text = harness.format_report_text(report)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.tsv").write_text(harness.format_report_tsv(report), encoding="utf-8")
        (out / "report.txt").write_text(text, encoding="utf-8")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
