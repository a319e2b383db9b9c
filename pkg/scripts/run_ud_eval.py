#!/usr/bin/env python3
"""Evaluate real checkpoints on Universal Dependencies treebanks.

Drives cloze, probe, and generation runs against one or more checkpoints
served over the wire protocol by the bridge package (see bridge/ in this
repository), then prints the combined report. Each --checkpoint is a
``label=name`` pair; the label becomes the model column in reports, the name
is passed to the bridge as the checkpoint to load:

    python3 scripts/run_ud_eval.py \\
        --language eng \\
        --train ud/en_ewt-ud-train.conllu --test ud/en_ewt-ud-test.conllu \\
        --checkpoint mono=bert-base-cased \\
        --checkpoint multi=bert-base-multilingual-cased \\
        --tasks cloze probe --out runs/eng

Treebanks are the standard UD .conllu releases; checkpoints resolve like any
other name the bridge's model loader accepts (hub name or local directory).
Runs are CPU-feasible but slow: expect minutes up to about an hour per
language and task for a full test set. As a rough sanity scale for cloze
subword accuracy on UD 2.4 test sets: strong monolingual English lands in the
mid-40s, multilingual English in the low-to-mid 30s, and multilingual Finnish
in the mid-teens; the English monolingual probe reaches the high 80s against
a majority baseline near 50.
"""

import argparse
import shlex
import sys
from pathlib import Path

from mlmeval import harness


def parse_checkpoint(text):
    label, sep, name = text.partition("=")
    if not sep or not label or not name:
        raise argparse.ArgumentTypeError(
            f"expected label=checkpoint, got {text!r}"
        )
    return label, name


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--language", required=True,
                        help="label recorded in metrics and reports")
    parser.add_argument("--train", required=True, help="UD training .conllu")
    parser.add_argument("--test", default="",
                        help="UD test .conllu (required for probe)")
    parser.add_argument("--checkpoint", action="append", required=True,
                        type=parse_checkpoint, metavar="LABEL=NAME",
                        help="model label and checkpoint; repeatable")
    parser.add_argument("--tasks", nargs="+", default=["cloze", "probe"],
                        choices=["cloze", "probe", "generate"])
    parser.add_argument("--out", required=True, help="directory collecting all runs")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--bridge-command", default="mlmbridge",
                        help="command serving the wire protocol on stdio")
    parser.add_argument("--device", default="cpu",
                        help="device argument forwarded to the bridge")
    parser.add_argument("--cloze-k", type=int, default=1)
    parser.add_argument("--generate-docs", type=int, default=30)
    parser.add_argument("--generate-per-doc", type=int, default=2)
    return parser.parse_args(argv)


def backend_spec(args, checkpoint):
    command = (
        f"{args.bridge_command} --checkpoint {shlex.quote(checkpoint)} "
        f"--transport stdio --device {shlex.quote(args.device)}"
    )
    return f"wire:{command}"


def build_configs(args):
    configs = []
    base = Path(args.out)
    for label, checkpoint in args.checkpoint:
        spec = backend_spec(args, checkpoint)
        labels = dict(language=args.language, model=label, seed=args.seed)
        if "cloze" in args.tasks:
            configs.append(harness.RunConfig(
                task="cloze", out=str(base / f"cloze-{label}"), backend=spec,
                train=args.train, k=args.cloze_k, **labels,
            ))
        if "probe" in args.tasks:
            if not args.test:
                raise SystemExit("probe needs --test")
            configs.append(harness.RunConfig(
                task="probe", out=str(base / f"probe-{label}"), backend=spec,
                train=args.train, test=args.test, **labels,
            ))
        if "generate" in args.tasks:
            configs.append(harness.RunConfig(
                task="generate", out=str(base / f"generate-{label}"), backend=spec,
                train=args.train, n_docs=args.generate_docs,
                per_doc=args.generate_per_doc, **labels,
            ))
    return configs


def main(argv=None):
    args = parse_args(argv)
    configs = build_configs(args)
    runs = []
    for config in configs:
        print(f"running {config.task} / {config.model} -> {config.out}", file=sys.stderr)
        runs.append(harness.run(config))
    report = harness.emit_report(runs)
    sys.stdout.write(harness.format_report_text(report))
    report_dir = Path(args.out)
    (report_dir / "report.tsv").write_text(
        harness.format_report_tsv(report), encoding="utf-8"
    )
    print(f"report.tsv written under {report_dir}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
