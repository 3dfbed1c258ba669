"""Subsequence extraction: random sampling for training, windowing for inference."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tokenize import TokenSequence, Vocabulary

PAD_ID = Vocabulary.PAD_ID


@dataclass(frozen=True)
class SamplerConfig:
    """Training subsequence length and sample-count policy.

    ``subseq_len`` defaults to 5000 tokens, inside the 4000-5000 band that
    trains well; ``n_samples_override`` bypasses the automatic per-recording
    sample count when set.
    """

    subseq_len: int = 5000
    n_samples_override: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.subseq_len < 1:
            raise ValueError(f"subseq_len must be >= 1, got {self.subseq_len}")
        if self.n_samples_override is not None and self.n_samples_override < 1:
            raise ValueError("n_samples_override must be >= 1 when set")


def compute_num_samples(max_len: int, subseq_len: int) -> int:
    """Number of random subsequences per recording: ``ceil(2.2 * L_max / L_r)``.

    Evaluated as ``ceil(11 * L_max / (5 * L_r))`` in exact integer
    arithmetic; going through the float literal 2.2 would over-count by one
    whenever the true ratio is an integer (e.g. L_max=5e5, L_r=5000).
    """
    if max_len < 1 or subseq_len < 1:
        raise ValueError("max_len and subseq_len must be >= 1")
    num = 11 * int(max_len)
    den = 5 * int(subseq_len)
    return -(-num // den)


def _pad_left(ids: np.ndarray, length: int) -> np.ndarray:
    out = np.full(length, PAD_ID, dtype=np.int32)
    out[length - len(ids):] = ids
    return out


def sample_subsequences(seq: TokenSequence, subseq_len: int, n_samples: int,
                        rng: np.random.Generator) -> list[TokenSequence]:
    """Draw ``n_samples`` random contiguous subsequences of ``subseq_len`` ids.

    Start indices are uniform over ``[0, len - subseq_len]``.  A recording
    shorter than ``subseq_len`` yields copies of the full sequence
    left-padded with PAD (the attention mask ignores the padding, keeping
    the melodic material adjacent to the sequence end).
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    n = len(seq)
    if n == 0:
        raise ValueError(f"cannot sample from empty sequence {seq.source_id!r}")
    out = []
    for i in range(n_samples):
        if n < subseq_len:
            ids = _pad_left(seq.ids, subseq_len)
        else:
            start = int(rng.integers(0, n - subseq_len + 1))
            ids = seq.ids[start:start + subseq_len].copy()
        out.append(TokenSequence(ids, source_id=f"{seq.source_id}#{i}",
                                 raga=seq.raga))
    return out


def split_for_inference(seq: TokenSequence, subseq_len: int) -> list[TokenSequence]:
    """Split a recording into consecutive non-overlapping voting windows.

    Full windows of ``subseq_len`` come first; the trailing remainder is
    kept (left-padded) iff it is at least half a window long, otherwise
    dropped.  A recording shorter than a full window is treated entirely as
    remainder.
    """
    n = len(seq)
    if n == 0:
        raise ValueError(f"cannot split empty sequence {seq.source_id!r}")
    windows = []
    n_full = n // subseq_len
    for w in range(n_full):
        ids = seq.ids[w * subseq_len:(w + 1) * subseq_len].copy()
        windows.append(TokenSequence(ids, source_id=f"{seq.source_id}@{w}",
                                     raga=seq.raga))
    rest = n - n_full * subseq_len
    if rest * 2 >= subseq_len and rest > 0:
        ids = _pad_left(seq.ids[n_full * subseq_len:], subseq_len)
        windows.append(TokenSequence(ids, source_id=f"{seq.source_id}@{n_full}",
                                     raga=seq.raga))
    return windows
