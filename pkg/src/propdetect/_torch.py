"""Small torch helpers shared by the tagger and the classifier."""

from __future__ import annotations

import contextlib

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence, pad_sequence


@contextlib.contextmanager
def seeded(seed: int):
    """Run a block under a fixed torch seed without touching global RNG state."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def to_tensor(matrix: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(np.asarray(matrix, dtype=np.float32))


def pad(matrices: list[torch.Tensor]) -> tuple[torch.Tensor, torch.Tensor]:
    lengths = torch.tensor([m.shape[0] for m in matrices], dtype=torch.long)
    return pad_sequence(matrices, batch_first=True), lengths


def run_lstm(lstm: nn.LSTM, x: torch.Tensor, lengths: torch.Tensor):
    """Run a batch-first LSTM over padded input.

    Returns the padded per-step outputs and the final hidden state of each
    sequence (directions concatenated).
    """
    packed = pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False)
    out, (h_n, _) = lstm(packed)
    out, _ = pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
    if lstm.bidirectional:
        last = torch.cat([h_n[-2], h_n[-1]], dim=-1)
    else:
        last = h_n[-1]
    return out, last


def batches(n: int, batch_size: int, rng: np.random.Generator | None):
    order = np.arange(n) if rng is None else rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]
