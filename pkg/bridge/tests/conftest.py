"""Shared fixtures: a tiny random-weight BERT checkpoint saved to a session
temp directory, so every test exercises a real WordPiece tokenizer and
masked-LM head without downloading anything."""

import os

# force offline before transformers touches its hub machinery
os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("HF_HUB_DISABLE_PROGRESS_BARS", "1")

import queue
import threading

import pytest
import torch
from transformers import BertConfig, BertForMaskedLM, BertTokenizer

from mlmbridge.model import MaskedLMModel

# wordpiece table: specials, punctuation, whole words, continuation pieces;
# chosen so "running", "cats", "walked" split in two and "unbreakable" in
# three, while "xyzzy" has no usable first piece and maps to [UNK]
VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "'", ",", ".", "!",
    "a", "cat", "dog", "mat", "on", "run", "s", "sat", "the", "un", "walk",
    "##able", "##break", "##ed", "##ing", "##ning", "##s",
]

HIDDEN_SIZE = 32
MAX_POSITIONS = 48


def build_checkpoint(path, seed: int = 0) -> None:
    path.mkdir(parents=True, exist_ok=True)
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_file), do_lower_case=True,
                              model_max_length=MAX_POSITIONS)
    tokenizer.save_pretrained(str(path))
    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=HIDDEN_SIZE,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=MAX_POSITIONS,
    )
    BertForMaskedLM(config).save_pretrained(str(path))


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("checkpoint") / "tiny-bert"
    build_checkpoint(path)
    return str(path)


@pytest.fixture(scope="session")
def model(checkpoint) -> MaskedLMModel:
    return MaskedLMModel.from_pretrained(checkpoint)


@pytest.fixture(scope="session")
def info(model):
    return model.model_info()


@pytest.fixture(scope="session")
def hf_parts(checkpoint):
    """The same checkpoint loaded raw, for independent-oracle forward passes."""
    from transformers import AutoModelForMaskedLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    hf_model = AutoModelForMaskedLM.from_pretrained(checkpoint)
    hf_model.eval()
    return tokenizer, hf_model


class LineReader:
    """Background reader turning a subprocess pipe into a line queue, so
    tests never block forever on a wedged server."""

    def __init__(self, stream):
        self._queue: queue.Queue[str] = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,), daemon=True)
        self._thread.start()

    def _pump(self, stream) -> None:
        for line in stream:
            self._queue.put(line)

    def next_line(self, timeout: float = 120.0) -> str:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            raise AssertionError(f"no line from process within {timeout}s")
