"""Mono 16-bit PCM WAV reading/writing and sine-tone rendering."""
from __future__ import annotations

import wave

import numpy as np

DEFAULT_SAMPLE_RATE = 16000


def read_wav(path):
    """Read a mono 16-bit PCM WAV file.

    Returns ``(samples, sample_rate)`` with samples as float64 in [-1, 1).
    """
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono audio, got "
                             f"{w.getnchannels()} channels")
        if w.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM, got "
                             f"{8 * w.getsampwidth()}-bit")
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path, samples, sample_rate=DEFAULT_SAMPLE_RATE):
    """Write float samples in [-1, 1] as mono 16-bit little-endian PCM."""
    samples = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(samples * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())


def render_note_values(values, tonic_hz, k, note_s=0.12,
                       sample_rate=DEFAULT_SAMPLE_RATE, amplitude=0.6):
    """Render quantized note values as a continuous-phase sine melody.

    Each value becomes a ``note_s``-second segment at
    ``tonic * 2**(value / (12 * k))`` Hz.  Phase is continuous across note
    boundaries so the only discontinuity is in frequency.
    """
    values = np.asarray(values, dtype=np.float64)
    freqs = tonic_hz * np.exp2(values / (12.0 * k))
    n_per_note = int(round(note_s * sample_rate))
    inst = np.repeat(freqs, n_per_note)
    phase = 2.0 * np.pi * np.cumsum(inst) / sample_rate
    return amplitude * np.sin(phase)
