"""Command line entry point: load a checkpoint, then serve the protocol.

Transport stdio reserves stdout for protocol frames (diagnostics go to
stderr); transport http binds a host/port and answers POST /v1/rpc. A
checkpoint that fails to load exits nonzero before serving anything.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass

from mlmbridge.model import MaskedLMModel
from mlmbridge.rpc import RPC_PATH, make_http_server, serve_stdio

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STARTUP = 1


@dataclass(frozen=True)
class BridgeConfig:
    checkpoint: str
    transport: str = "stdio"
    host: str = "127.0.0.1"
    port: int = 8001
    device: str = "cpu"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlmbridge",
        description="Serve a pretrained masked-LM checkpoint over the scoring protocol.",
    )
    parser.add_argument("--checkpoint", required=True,
                        help="model identifier or local path accepted by transformers")
    parser.add_argument("--transport", choices=("stdio", "http"), default="stdio",
                        help="stdio answers frames on stdout; http binds host:port")
    parser.add_argument("--host", default="127.0.0.1", help="http bind address")
    parser.add_argument("--port", type=int, default=8001,
                        help="http port; 0 picks a free one")
    parser.add_argument("--device", default="cpu", help="torch device string")
    return parser


def load(config: BridgeConfig) -> MaskedLMModel:
    return MaskedLMModel.from_pretrained(config.checkpoint, device=config.device)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = BridgeConfig(checkpoint=args.checkpoint, transport=args.transport,
                          host=args.host, port=args.port, device=args.device)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    from transformers.utils import logging as hf_logging

    hf_logging.disable_progress_bar()  # keep stderr line-oriented
    logger.info("loading checkpoint %s on %s", config.checkpoint, config.device)
    try:
        model = load(config)
    except Exception as exc:
        logger.error("cannot load checkpoint %s: %s", config.checkpoint, exc)
        return EXIT_STARTUP
    info = model.model_info()
    logger.info("ready: hidden_size=%d vocab_size=%d max_seq_len=%d",
                info.hidden_size, info.vocab_size, info.max_seq_len)
    if config.transport == "stdio":
        serve_stdio(model)
        return EXIT_OK
    server = make_http_server(model, config.host, config.port)
    endpoint = f"http://{config.host}:{server.server_address[1]}{RPC_PATH}"
    logger.info("serving on %s", endpoint)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK
