#!/usr/bin/env python3
"""Serve a toy scoring backend over the wire protocol.

Useful as a stand-in inference server when testing `wire:` backends without
any model weights. Stdio mode keeps stdout reserved for protocol frames, so
it can be used directly as a child-process backend:

    mlmeval cloze --train data.conllu \\
        --backend "wire:python3 scripts/serve_toy_backend.py --corpus data.conllu" \\
        --out runs/wire-demo

HTTP mode binds a port and prints the endpoint to use with wire:http://...:

    python3 scripts/serve_toy_backend.py --corpus data.conllu --transport http --port 8750
"""

import argparse
import sys
import tempfile
from pathlib import Path

from mlmeval.conllu import parse_conllu_file
from mlmeval.fixtures import fixture_conllu
from mlmeval.scorer.rpc import make_http_server, serve_stdio
from mlmeval.scorer.toy import CharPieceBackend, EchoBackend, UnigramBackend

BACKENDS = {
    "toy-echo": EchoBackend,
    "toy-unigram": UnigramBackend,
    "toy-char": CharPieceBackend,
}


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", default="",
                        help="CoNLL-U file the toy builds its vocabulary from "
                             "(default: the built-in fixture corpus)")
    parser.add_argument("--backend", default="toy-unigram", choices=sorted(BACKENDS))
    parser.add_argument("--transport", default="stdio", choices=["stdio", "http"])
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0,
                        help="HTTP port; 0 picks a free one")
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    if args.corpus:
        treebank = parse_conllu_file(args.corpus)
    else:
        with tempfile.NamedTemporaryFile("w", suffix=".conllu", delete=False) as fh:
            fh.write(fixture_conllu())
            path = Path(fh.name)
        treebank = parse_conllu_file(path)
        path.unlink()
    corpus = list(treebank.sentences())
    backend = BACKENDS[args.backend](corpus)
    print(f"serving {args.backend} over {len(corpus)} sentences", file=sys.stderr)

    if args.transport == "stdio":
        serve_stdio(backend)
        return 0

    server = make_http_server(backend, args.host, args.port)
    host, port = server.server_address[:2]
    print(f"endpoint: http://{host}:{port}/v1/rpc", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
