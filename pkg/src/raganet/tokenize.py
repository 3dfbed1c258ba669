"""Tonic normalization, quantization and vocabulary management.

A pitch contour is turned into a sequence of integer note tokens by
expressing every voiced frame in cents relative to the performer's tonic
and rounding to ``k`` levels per half step.  Token values are therefore
small signed integers (0 = tonic, ``12 * k`` = one octave up) and are
independent of the absolute tuning of the recording.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import ensure_positive

CENTS_PER_HALF_STEP = 100
HALF_STEPS_PER_OCTAVE = 12


def normalize_cents(f, tonic_hz):
    """Tonic-normalized frequency in cents: ``1200 * log2(f / tonic)``.

    Accepts scalars or arrays; all frequencies must be positive.
    """
    f_arr = np.asarray(f, dtype=np.float64)
    t = ensure_positive("tonic_hz", tonic_hz)
    if f_arr.size and (np.any(~np.isfinite(f_arr)) or np.any(f_arr <= 0)):
        raise ValueError("frequencies must be positive and finite")
    out = 1200.0 * np.log2(f_arr / t)
    return float(out) if np.isscalar(f) or f_arr.ndim == 0 else out


def _round_half_away(x):
    # fixed tie rule: round half away from zero, for determinism across
    # platforms (banker's rounding would depend on parity)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(f, tonic_hz, k=5):
    """Quantized note value: ``round(1200 * log2(f/T) * (k/100))``.

    ``k`` is the number of levels per half step; with ``k=5`` adjacent
    values are 20 cents apart.  Rounding is half away from zero.
    """
    if int(k) < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    cents = normalize_cents(f, tonic_hz)
    value = _round_half_away(np.asarray(cents) * (int(k) / CENTS_PER_HALF_STEP))
    if np.isscalar(cents):
        return int(value)
    return value.astype(np.int64)


@dataclass(frozen=True)
class QuantizerConfig:
    """Quantizer levels and the octave range kept in-vocabulary."""

    k: int = 5
    clamp_octaves: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.clamp_octaves < 1:
            raise ValueError(
                f"clamp_octaves must be >= 1, got {self.clamp_octaves}"
            )

    @property
    def max_abs_value(self) -> int:
        return HALF_STEPS_PER_OCTAVE * self.k * self.clamp_octaves


class Vocabulary:
    """Bijection between quantized note values and contiguous ids.

    Ids 0 and 1 are reserved for PAD and OOV; note values in
    ``[-12*k*clamp, +12*k*clamp]`` map to ids 2 onward in ascending order.
    For the defaults (k=5, clamp=2) this gives 243 ids.
    """

    PAD_ID = 0
    OOV_ID = 1
    _N_SPECIAL = 2

    def __init__(self, config: QuantizerConfig = QuantizerConfig()):
        self.config = config
        self._vmax = config.max_abs_value

    def __len__(self) -> int:
        return 2 * self._vmax + 1 + self._N_SPECIAL

    @property
    def size(self) -> int:
        return len(self)

    def id_for_value(self, value):
        """Map quantized note value(s) to vocabulary id(s), OOV if clamped."""
        v = np.asarray(value, dtype=np.int64)
        ids = np.where(np.abs(v) > self._vmax, self.OOV_ID,
                       v + self._vmax + self._N_SPECIAL)
        if np.isscalar(value) or v.ndim == 0:
            return int(ids)
        return ids.astype(np.int32)

    def value_for_id(self, token_id: int):
        """Inverse mapping; PAD and OOV have no note value (returns None)."""
        if not 0 <= token_id < len(self):
            raise ValueError(f"id {token_id} outside vocabulary of {len(self)}")
        if token_id in (self.PAD_ID, self.OOV_ID):
            return None
        return int(token_id) - self._vmax - self._N_SPECIAL

    def validate_ids(self, ids):
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= len(self)):
            raise ValueError("token id outside vocabulary range")
        return ids


@dataclass
class TokenSequence:
    """Vocabulary ids for one recording or subsequence."""

    ids: np.ndarray
    source_id: str = ""
    raga: int | None = None

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int32)

    def __len__(self) -> int:
        return int(self.ids.shape[0])


def tokenize_contour(contour, tonic_hz, cfg: QuantizerConfig,
                     vocab: Vocabulary, source_id: str = "",
                     raga: int | None = None,
                     rest_token: bool = False) -> TokenSequence:
    """Quantize the voiced frames of a pitch contour into vocabulary ids.

    Unvoiced frames are dropped; values outside the clamp range map to the
    OOV id.  With ``rest_token=True`` unvoiced frames are kept and emitted
    as the OOV id instead (reusing its slot as a rest marker); this is off
    by default.
    """
    if vocab.config != cfg:
        raise ValueError("vocabulary was built for a different quantizer config")
    tonic = ensure_positive("tonic_hz", tonic_hz)
    voiced = np.asarray(contour.voiced, dtype=bool)
    f0 = np.asarray(contour.f0_hz, dtype=np.float64)
    if not voiced.any():
        ids = np.zeros(0, dtype=np.int32)
        if rest_token:
            ids = np.full(voiced.shape[0], vocab.OOV_ID, dtype=np.int32)
        return TokenSequence(ids, source_id=source_id, raga=raga)
    values = quantize(f0[voiced], tonic, cfg.k)
    ids = vocab.id_for_value(values)
    if rest_token:
        full = np.full(voiced.shape[0], vocab.OOV_ID, dtype=np.int32)
        full[voiced] = ids
        ids = full
    return TokenSequence(ids, source_id=source_id, raga=raga)


class ContourTokenizer(TransformerMixin, BaseEstimator):
    """Stateless transformer from ``(PitchContour, tonic_hz)`` pairs to
    :class:`TokenSequence`.

    Parameters
    ----------
    k : int, default=5
        Quantizer levels per half step.
    clamp_octaves : int, default=2
        Octaves about the tonic kept in-vocabulary.
    rest_token : bool, default=False
        Emit unvoiced frames as OOV-slot rest markers instead of dropping.
    """

    def __init__(self, k: int = 5, clamp_octaves: int = 2,
                 rest_token: bool = False):
        self.k = k
        self.clamp_octaves = clamp_octaves
        self.rest_token = rest_token

    def _config(self) -> QuantizerConfig:
        return QuantizerConfig(k=self.k, clamp_octaves=self.clamp_octaves)

    @property
    def vocabulary_(self) -> Vocabulary:
        return Vocabulary(self._config())

    def fit(self, X=None, y=None):
        self._config()  # validates hyperparameters
        return self

    def transform(self, X):
        """Tokenize an iterable of ``(contour, tonic_hz)`` pairs."""
        cfg = self._config()
        vocab = Vocabulary(cfg)
        return [
            tokenize_contour(contour, tonic, cfg, vocab,
                             rest_token=self.rest_token)
            for contour, tonic in X
        ]
