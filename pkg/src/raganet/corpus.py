"""Dataset manifests, token/audio ingestion and a synthetic-raga generator.

The manifest is a UTF-8 CSV with header ``id,audio_path,token_path,tonic_hz,
raga``; an empty field means absent, and each entry must carry exactly one of
the two paths.  Token files are newline-delimited signed quantized note
values (pre-vocabulary), so they stay human-readable and independent of any
particular vocabulary layout.

The synthetic generator stands in for corpora whose audio cannot be
redistributed.  Each synthetic raga is a first-order Markov walk over a
two-octave scale grid; ragas share the note set but differ in which melodic
steps their ascending/descending movements allow and in the transition
weights, which is the part of real ragas (arohana/avarohana) that a sequence
classifier must pick up.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import audio
from .pitch import PitchConfig, track_pitch
from .tokenize import QuantizerConfig, TokenSequence, Vocabulary, tokenize_contour
from .validation import ensure_positive

MANIFEST_COLUMNS = ["id", "audio_path", "token_path", "tonic_hz", "raga"]

SYNTH_TONIC_HZ = 146.83  # D3; arbitrary fixed reference for synthetic data
SYNTH_NOTE_S = 0.12      # several pitch frames per note at 10 ms hop

# seven-degree scale shared by all synthetic ragas, spread over two octaves;
# ragas differ in movement, not note set, so short excerpts stay confusable
_SCALE_SEMITONES = (0, 2, 4, 5, 7, 9, 11)
_STEPS = (-3, -2, -1, 0, 1, 2, 3)
_STEP_WEIGHTS = (0.06, 0.16, 0.26, 0.04, 0.26, 0.16, 0.06)


@dataclass
class ManifestEntry:
    id: str
    tonic_hz: float
    raga: str
    audio_path: str | None = None
    token_path: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("entry id must be non-empty")
        ensure_positive(f"tonic_hz of entry {self.id!r}", self.tonic_hz)
        if not self.raga:
            raise ValueError(f"entry {self.id!r}: raga label must be non-empty")
        has_audio = bool(self.audio_path)
        has_tokens = bool(self.token_path)
        if has_audio == has_tokens:
            raise ValueError(
                f"entry {self.id!r}: exactly one of audio_path/token_path "
                "must be present"
            )


@dataclass
class Dataset:
    entries: list[ManifestEntry]
    class_map: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.class_map:
            labels = sorted({e.raga for e in self.entries})
            self.class_map = {label: i for i, label in enumerate(labels)}

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def n_classes(self) -> int:
        return len(self.class_map)

    def labels(self) -> list[str]:
        return sorted(self.class_map, key=self.class_map.get)

    def class_of(self, entry: ManifestEntry) -> int:
        return self.class_map[entry.raga]

    def counts_per_raga(self) -> dict[str, int]:
        counts = {label: 0 for label in self.class_map}
        for e in self.entries:
            counts[e.raga] += 1
        return counts

    def is_balanced(self) -> bool:
        counts = set(self.counts_per_raga().values())
        return len(counts) == 1

    def subset(self, ids) -> "Dataset":
        """Entries with the given ids, keeping the full class map."""
        wanted = set(ids)
        picked = [e for e in self.entries if e.id in wanted]
        if len(picked) != len(wanted):
            missing = wanted - {e.id for e in picked}
            raise KeyError(f"unknown entry ids: {sorted(missing)}")
        return Dataset(picked, class_map=dict(self.class_map))


def _resolve(base: Path, p: str) -> str:
    path = Path(p)
    return str(path if path.is_absolute() else base / path)


def load_manifest(path) -> Dataset:
    """Parse a manifest CSV into a Dataset with a deterministic class map.

    Relative paths are resolved against the manifest's directory.  A row
    with a missing or non-positive tonic, a malformed path pair, or a
    duplicate id raises ValueError naming the row.
    """
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or \
                [c.strip() for c in reader.fieldnames] != MANIFEST_COLUMNS:
            raise ValueError(
                f"{path}: manifest header must be {','.join(MANIFEST_COLUMNS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            rid = (row["id"] or "").strip()
            where = f"{path} line {lineno} (id={rid!r})"
            tonic_raw = (row["tonic_hz"] or "").strip()
            try:
                tonic = float(tonic_raw)
            except ValueError:
                raise ValueError(f"{where}: tonic_hz {tonic_raw!r} is not a "
                                 "number") from None
            try:
                entry = ManifestEntry(
                    id=rid,
                    tonic_hz=tonic,
                    raga=(row["raga"] or "").strip(),
                    audio_path=(row["audio_path"] or "").strip() or None,
                    token_path=(row["token_path"] or "").strip() or None,
                )
            except ValueError as exc:
                raise ValueError(f"{where}: {exc}") from None
            if entry.id in seen:
                raise ValueError(f"{where}: duplicate id")
            seen.add(entry.id)
            if entry.audio_path:
                entry.audio_path = _resolve(base, entry.audio_path)
            if entry.token_path:
                entry.token_path = _resolve(base, entry.token_path)
            entries.append(entry)
    return Dataset(entries)


def save_manifest(dataset: Dataset, path, relative_to=None) -> None:
    path = Path(path)
    rel = Path(relative_to) if relative_to is not None else None

    def fmt(p):
        if not p:
            return ""
        if rel is not None:
            try:
                return str(Path(p).relative_to(rel))
            except ValueError:
                pass
        return str(p)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_COLUMNS)
        for e in dataset.entries:
            w.writerow([e.id, fmt(e.audio_path), fmt(e.token_path),
                        f"{e.tonic_hz:.4f}", e.raga])


def read_tokens(path) -> np.ndarray:
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(int(line))
            except ValueError:
                raise ValueError(
                    f"{path} line {lineno}: {line!r} is not an integer"
                ) from None
    return np.asarray(values, dtype=np.int64)


def write_tokens(path, values) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(str(int(v)) for v in values))
        fh.write("\n")


@dataclass(frozen=True)
class SynthConfig:
    n_ragas: int = 5
    recordings_per_raga: int = 12
    seq_len: int = 5000
    seed: int = 0
    render_audio: bool = False
    k_levels: int = 5

    def __post_init__(self):
        if self.n_ragas < 2:
            raise ValueError(f"n_ragas must be >= 2, got {self.n_ragas}")
        if self.recordings_per_raga < 1:
            raise ValueError("recordings_per_raga must be >= 1")
        if self.seq_len < 1:
            raise ValueError("seq_len must be >= 1")
        if self.k_levels < 1:
            raise ValueError("k_levels must be >= 1")


def validate_transitions(matrix: np.ndarray) -> np.ndarray:
    """Reject transition matrices in which some state has no way out."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("transition matrix must be square")
    row_mass = matrix.sum(axis=1)
    dead = np.flatnonzero(row_mass <= 0)
    if dead.size:
        raise ValueError(f"transition mask has dead-end state(s) {dead.tolist()}")
    return matrix / row_mass[:, None]


def _grid_semitones() -> np.ndarray:
    octave = np.asarray(_SCALE_SEMITONES)
    return np.concatenate([octave, octave + 12])


def synth_transition_matrix(raga_index: int, seed: int) -> np.ndarray:
    """Movement profile of one synthetic raga over the 14-state scale grid.

    Each raga forbids one larger step size per direction (its
    ascending/descending constraint) and jitters the remaining step weights,
    so any two ragas differ in both the support and the shape of their
    bigram distribution while sharing the same notes.
    """
    rng = np.random.default_rng([seed, raga_index, 0xA11])
    n = _grid_semitones().shape[0]
    banned_up = int(rng.integers(2, 4))     # forbid ascending by 2 or by 3
    banned_down = -int(rng.integers(2, 4))  # forbid descending by 2 or by 3
    jitter = np.exp(0.5 * rng.standard_normal((n, len(_STEPS))))
    matrix = np.zeros((n, n))
    for i in range(n):
        for s, (step, w) in enumerate(zip(_STEPS, _STEP_WEIGHTS)):
            j = i + step
            if not 0 <= j < n:
                continue
            if step == banned_up or step == banned_down:
                continue
            matrix[i, j] += w * jitter[i, s]
    return validate_transitions(matrix)


def _walk(matrix: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    n = matrix.shape[0]
    cum = np.cumsum(matrix, axis=1)
    cum[:, -1] = 1.0
    states = np.empty(length, dtype=np.int64)
    state = int(rng.integers(0, n))
    draws = rng.random(length)
    for t in range(length):
        state = int(np.searchsorted(cum[state], draws[t], side="right"))
        states[t] = state
    return states


def generate_synthetic_corpus(cfg: SynthConfig, out_dir) -> Dataset:
    """Write a seeded synthetic corpus under ``out_dir`` and return it.

    Token files are always written (they are the ground truth); when
    ``render_audio`` is set, each recording is additionally rendered as a
    sine melody at the fixed synthetic tonic and the manifest points at the
    audio instead of the tokens.  Regeneration with the same config is
    byte-identical.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    semis = _grid_semitones()
    matrices = [synth_transition_matrix(r, cfg.seed) for r in range(cfg.n_ragas)]
    entries = []
    for r in range(cfg.n_ragas):
        label = f"raga{r:02d}"
        for rec in range(cfg.recordings_per_raga):
            rid = f"{label}_rec{rec:02d}"
            rng = np.random.default_rng([cfg.seed, r, rec])
            states = _walk(matrices[r], cfg.seq_len, rng)
            values = semis[states] * cfg.k_levels
            token_path = out_dir / f"{rid}.tokens"
            write_tokens(token_path, values)
            audio_path = None
            if cfg.render_audio:
                samples = audio.render_note_values(
                    values, SYNTH_TONIC_HZ, cfg.k_levels, note_s=SYNTH_NOTE_S)
                audio_path = out_dir / f"{rid}.wav"
                audio.write_wav(audio_path, samples)
            entries.append(ManifestEntry(
                id=rid,
                tonic_hz=SYNTH_TONIC_HZ,
                raga=label,
                audio_path=str(audio_path) if audio_path else None,
                token_path=None if audio_path else str(token_path),
            ))
    dataset = Dataset(entries)
    save_manifest(dataset, out_dir / "manifest.csv", relative_to=out_dir)
    return dataset


def load_sequences(dataset: Dataset, quant_cfg: QuantizerConfig = QuantizerConfig(),
                   pitch_cfg: PitchConfig = PitchConfig()) -> list[TokenSequence]:
    """Materialize every entry as a TokenSequence of vocabulary ids.

    Token-file entries map their stored values through the vocabulary;
    audio entries go through pitch tracking and tonic-normalized
    quantization first.
    """
    vocab = Vocabulary(quant_cfg)
    sequences = []
    for entry in dataset.entries:
        label = dataset.class_of(entry)
        if entry.token_path:
            values = read_tokens(entry.token_path)
            ids = vocab.id_for_value(values)
            seq = TokenSequence(ids, source_id=entry.id, raga=label)
        else:
            samples, rate = audio.read_wav(entry.audio_path)
            contour = track_pitch(samples, rate, pitch_cfg)
            seq = tokenize_contour(contour, entry.tonic_hz, quant_cfg, vocab,
                                   source_id=entry.id, raga=label)
        sequences.append(seq)
    return sequences
