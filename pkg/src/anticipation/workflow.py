"""Synthetic procedural timelines and ingestion of real annotation files.

A procedure is a timeline of frames carrying per-instrument presence flags,
an optional phase index per frame, and optional per-frame feature vectors
(the observable input of the predictor; a stand-in for video frames).

The simulator draws a duration, partitions it into phases, places sparse
instrument usage segments inside phases, fires trigger rules (instrument A
makes instrument B appear after a delay), and emits decodable features.
All randomness is derived from ``(config, seed)``, so generation is
reproducible byte for byte.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import AnnotationParseError


@dataclass(frozen=True)
class ProcedureSequence:
    """One procedure: presence flags plus optional features and phases."""

    id: str
    presence: np.ndarray                      # (n, K) bool
    fps: float = 1.0
    features: Optional[np.ndarray] = None     # (n, F) float64
    phase: Optional[np.ndarray] = None        # (n,) int64
    names: Optional[tuple[str, ...]] = None   # instrument names, length K

    def __post_init__(self):
        presence = np.asarray(self.presence, dtype=bool)
        if presence.ndim != 2 or presence.shape[0] < 1:
            raise ValueError("presence must be a nonempty (n, K) array")
        object.__setattr__(self, "presence", presence)
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim != 2 or feats.shape[0] != presence.shape[0]:
                raise ValueError(
                    f"features must be (n, F) with n={presence.shape[0]}, got {feats.shape}"
                )
            object.__setattr__(self, "features", feats)
        if self.phase is not None:
            phase = np.asarray(self.phase, dtype=np.int64)
            if phase.shape != (presence.shape[0],):
                raise ValueError("phase must be a (n,) array")
            if (phase < 0).any():
                raise ValueError("phase indices must be non-negative")
            object.__setattr__(self, "phase", phase)
        if self.names is not None and len(self.names) != presence.shape[1]:
            raise ValueError("names length must equal instrument count")

    @property
    def n_frames(self) -> int:
        return self.presence.shape[0]

    @property
    def n_instruments(self) -> int:
        return self.presence.shape[1]

    @property
    def feature_dim(self) -> Optional[int]:
        return None if self.features is None else self.features.shape[1]


@dataclass(frozen=True)
class PhaseSpec:
    """Relative length distribution of one phase (frames before rescaling)."""

    length_mean: float
    length_std: float = 0.0


@dataclass(frozen=True)
class UsageRule:
    """Sparse usage of one instrument inside one phase.

    With probability ``probability`` the instrument is used in the phase:
    ``segments`` segments of normally distributed length are placed at
    uniformly random onsets within the phase.
    """

    instrument: int
    phase: int
    probability: float
    length_mean: float = 10.0
    length_std: float = 0.0
    segments: int = 1


@dataclass(frozen=True)
class TriggerRule:
    """Occurrences of ``trigger`` cause ``target`` to appear after a delay.

    Every onset of the trigger instrument fires independently with
    ``probability``; the target onset lands ``delay_mean`` frames later,
    jittered uniformly by up to ``delay_jitter`` frames.  Onsets that fall
    beyond the end of the sequence are dropped.
    """

    trigger: int
    target: int
    delay_mean: float
    delay_jitter: float = 0.0
    probability: float = 1.0
    length_mean: float = 10.0
    length_std: float = 0.0


@dataclass(frozen=True)
class FeatureSpec:
    """How observable features are emitted from presence and phase.

    Each instrument and each phase owns a signature vector; a frame's
    feature vector is the sum of the signatures of everything visible in
    that frame plus Gaussian noise.  The default signatures are scaled
    one-hot blocks (instrument k -> axis k, phase p -> axis K + p), which
    makes presence and phase exactly decodable at zero noise.
    """

    dim: Optional[int] = None       # default K + P
    noise_std: float = 0.0
    instrument_gain: float = 1.0
    phase_gain: float = 1.0
    instrument_signatures: Optional[np.ndarray] = None  # (K, F)
    phase_signatures: Optional[np.ndarray] = None       # (P, F)


@dataclass(frozen=True)
class SimConfig:
    """Full description of a synthetic procedure population."""

    instruments: int
    phases: int
    duration_mean: float
    duration_std: float = 0.0
    phase_plan: tuple[PhaseSpec, ...] = ()
    usage_rules: tuple[UsageRule, ...] = ()
    trigger_rules: tuple[TriggerRule, ...] = ()
    features: FeatureSpec = field(default_factory=FeatureSpec)
    fps: float = 1.0
    instrument_names: Optional[tuple[str, ...]] = None

    def validate(self) -> None:
        if self.instruments < 1:
            raise ValueError(f"instruments must be >= 1, got {self.instruments}")
        if self.phases < 1:
            raise ValueError(f"phases must be >= 1, got {self.phases}")
        if self.duration_mean <= 0:
            raise ValueError(f"duration_mean must be positive, got {self.duration_mean}")
        if self.duration_std < 0:
            raise ValueError(f"duration_std must be >= 0, got {self.duration_std}")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if len(self.phase_plan) != self.phases:
            raise ValueError(
                f"phase_plan has {len(self.phase_plan)} entries for {self.phases} phases"
            )
        for i, spec in enumerate(self.phase_plan):
            if spec.length_mean <= 0:
                raise ValueError(f"phase_plan[{i}].length_mean must be positive")
        for i, rule in enumerate(self.usage_rules):
            if not 0 <= rule.instrument < self.instruments:
                raise ValueError(f"usage_rules[{i}].instrument out of range")
            if not 0 <= rule.phase < self.phases:
                raise ValueError(f"usage_rules[{i}].phase out of range")
            if not 0.0 <= rule.probability <= 1.0:
                raise ValueError(f"usage_rules[{i}].probability not in [0, 1]")
            if rule.length_mean <= 0 or rule.segments < 1:
                raise ValueError(f"usage_rules[{i}] has non-positive length or segments")
        for i, rule in enumerate(self.trigger_rules):
            if not 0 <= rule.trigger < self.instruments:
                raise ValueError(f"trigger_rules[{i}].trigger out of range")
            if not 0 <= rule.target < self.instruments:
                raise ValueError(f"trigger_rules[{i}].target out of range")
            if rule.delay_mean < 0 or rule.delay_jitter < 0:
                raise ValueError(f"trigger_rules[{i}] delay must be >= 0")
            if not 0.0 <= rule.probability <= 1.0:
                raise ValueError(f"trigger_rules[{i}].probability not in [0, 1]")
            if rule.length_mean <= 0:
                raise ValueError(f"trigger_rules[{i}].length_mean must be positive")
        if self.features.noise_std < 0:
            raise ValueError("features.noise_std must be >= 0")
        if self.features.dim is not None and self.features.dim < 1:
            raise ValueError("features.dim must be >= 1")
        if self.instrument_names is not None and len(self.instrument_names) != self.instruments:
            raise ValueError("instrument_names length must equal instruments")

    @property
    def feature_dim(self) -> int:
        if self.features.dim is not None:
            return self.features.dim
        return self.instruments + self.phases

    def signature_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Instrument (K, F) and phase (P, F) signature matrices."""
        f = self.feature_dim
        spec = self.features
        if spec.instrument_signatures is not None:
            inst = np.asarray(spec.instrument_signatures, dtype=np.float64)
            if inst.shape != (self.instruments, f):
                raise ValueError(f"instrument_signatures must be {(self.instruments, f)}")
        else:
            inst = np.zeros((self.instruments, f))
            for k in range(min(self.instruments, f)):
                inst[k, k] = spec.instrument_gain
        if spec.phase_signatures is not None:
            ph = np.asarray(spec.phase_signatures, dtype=np.float64)
            if ph.shape != (self.phases, f):
                raise ValueError(f"phase_signatures must be {(self.phases, f)}")
        else:
            ph = np.zeros((self.phases, f))
            for p in range(self.phases):
                col = self.instruments + p
                if col < f:
                    ph[p, col] = spec.phase_gain
        return inst, ph


def _segment_length(rng: np.random.Generator, mean: float, std: float) -> int:
    return max(1, int(round(rng.normal(mean, std)))) if std > 0 else max(1, int(round(mean)))


def _phase_boundaries(config: SimConfig, duration: int, rng: np.random.Generator) -> np.ndarray:
    """Per-frame phase index; relative lengths rescaled to fill the duration."""
    raw = np.array(
        [max(_segment_length(rng, p.length_mean, p.length_std), 1) for p in config.phase_plan],
        dtype=np.float64,
    )
    cuts = np.floor(np.cumsum(raw) / raw.sum() * duration).astype(int)
    cuts[-1] = duration
    phase = np.empty(duration, dtype=np.int64)
    start = 0
    for p, end in enumerate(cuts):
        phase[start:max(end, start)] = p
        start = max(end, start)
    return phase


def _place_segment(presence: np.ndarray, instrument: int, onset: int, length: int) -> None:
    n = presence.shape[0]
    if onset >= n:
        return  # clipped at the end of the procedure: dropped
    presence[onset:min(onset + length, n), instrument] = True


def emit_features(
    presence: np.ndarray,
    phase: Optional[np.ndarray],
    config: SimConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-frame features: sum of visible signatures plus Gaussian noise."""
    inst_sig, phase_sig = config.signature_matrices()
    feats = presence.astype(np.float64) @ inst_sig
    if phase is not None:
        feats += phase_sig[phase]
    if config.features.noise_std > 0:
        feats += rng.normal(0.0, config.features.noise_std, size=feats.shape)
    return feats


def generate_sequence(config: SimConfig, seq_id: str, seed: int) -> ProcedureSequence:
    """Generate one procedure from its own derived seed."""
    rng = np.random.default_rng(seed)
    duration = max(1, int(round(rng.normal(config.duration_mean, config.duration_std))))
    phase = _phase_boundaries(config, duration, rng)
    phase_start = np.searchsorted(phase, np.arange(config.phases), side="left")
    phase_end = np.searchsorted(phase, np.arange(config.phases), side="right")

    presence = np.zeros((duration, config.instruments), dtype=bool)
    for rule in config.usage_rules:
        lo, hi = int(phase_start[rule.phase]), int(phase_end[rule.phase])
        if hi <= lo:
            continue  # phase collapsed to zero frames in this draw
        if rng.random() > rule.probability:
            continue
        for _ in range(rule.segments):
            onset = int(rng.integers(lo, hi))
            _place_segment(presence, rule.instrument, onset,
                           _segment_length(rng, rule.length_mean, rule.length_std))

    for rule in config.trigger_rules:
        onsets = instrument_onsets(presence[:, rule.trigger])
        for onset in onsets:
            if rng.random() > rule.probability:
                continue
            delay = rule.delay_mean
            if rule.delay_jitter > 0:
                delay += rng.uniform(-rule.delay_jitter, rule.delay_jitter)
            target_onset = onset + max(0, int(round(delay)))
            _place_segment(presence, rule.target, target_onset,
                           _segment_length(rng, rule.length_mean, rule.length_std))

    feats = emit_features(presence, phase, config, rng)
    return ProcedureSequence(
        id=seq_id, presence=presence, fps=config.fps,
        features=feats, phase=phase, names=config.instrument_names,
    )


def generate_dataset(config: SimConfig, n: int, seed: int) -> list[ProcedureSequence]:
    """Generate ``n`` procedures, each from the derived seed ``seed ^ index``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    config.validate()
    return [generate_sequence(config, f"proc_{i:04d}", seed ^ i) for i in range(n)]


def instrument_onsets(track: np.ndarray) -> np.ndarray:
    """Frame indices where maximal presence runs begin."""
    track = np.asarray(track, dtype=bool)
    prev = np.concatenate(([False], track[:-1]))
    return np.flatnonzero(track & ~prev)


# ---------------------------------------------------------------------------
# Annotation file ingestion and serialization
# ---------------------------------------------------------------------------

ANNOTATION_FORMATS = ("cholec80_tool_tsv", "generic_csv")


def _parse_binary(value: str, line_no: int, path: str) -> bool:
    if value == "0":
        return False
    if value == "1":
        return True
    raise AnnotationParseError(
        f"{path}: line {line_no}: presence value {value!r} is not 0 or 1"
    )


def _parse_int(value: str, line_no: int, path: str, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise AnnotationParseError(
            f"{path}: line {line_no}: {what} {value!r} is not an integer"
        ) from None


def load_annotations(path: str, format: str = "generic_csv", fps: float = 1.0) -> ProcedureSequence:
    """Load presence annotations from a file.

    ``cholec80_tool_tsv`` is tab-separated with header ``Frame`` followed by
    one column per tool and rows at source-fps intervals; ``generic_csv`` is
    comma-separated with header ``frame,<inst_1>,...,<inst_K>[,phase]``.  Row
    indices must be strictly increasing; rows are renumbered to consecutive
    frames 0..n-1 at the declared ``fps``.
    """
    if format not in ANNOTATION_FORMATS:
        raise ValueError(f"unknown annotation format {format!r}, expected one of {ANNOTATION_FORMATS}")
    sep = "\t" if format == "cholec80_tool_tsv" else ","
    frame_field = "Frame" if format == "cholec80_tool_tsv" else "frame"
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise AnnotationParseError(f"{path}: file is empty")
    header = lines[0].split(sep)
    if len(header) < 2 or header[0].strip() != frame_field:
        raise AnnotationParseError(
            f"{path}: line 1: header must start with {frame_field!r} and name at least one instrument"
        )
    names = [h.strip() for h in header[1:]]
    has_phase = format == "generic_csv" and names and names[-1] == "phase"
    if has_phase:
        names = names[:-1]
        if not names:
            raise AnnotationParseError(f"{path}: line 1: no instrument columns before 'phase'")
    k = len(names)

    presence_rows: list[list[bool]] = []
    phase_rows: list[int] = []
    last_index: Optional[int] = None
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(sep)
        expected = 1 + k + (1 if has_phase else 0)
        if len(cells) != expected:
            raise AnnotationParseError(
                f"{path}: line {line_no}: expected {expected} fields, got {len(cells)}"
            )
        index = _parse_int(cells[0].strip(), line_no, path, "frame index")
        if last_index is not None and index <= last_index:
            raise AnnotationParseError(
                f"{path}: line {line_no}: frame index {index} not greater than previous {last_index}"
            )
        last_index = index
        presence_rows.append([_parse_binary(c.strip(), line_no, path) for c in cells[1:1 + k]])
        if has_phase:
            phase = _parse_int(cells[1 + k].strip(), line_no, path, "phase index")
            if phase < 0:
                raise AnnotationParseError(f"{path}: line {line_no}: phase index {phase} is negative")
            phase_rows.append(phase)
    if not presence_rows:
        raise AnnotationParseError(f"{path}: no data rows")

    seq_id = os.path.splitext(os.path.basename(path))[0]
    return ProcedureSequence(
        id=seq_id,
        presence=np.array(presence_rows, dtype=bool),
        fps=fps,
        phase=np.array(phase_rows, dtype=np.int64) if has_phase else None,
        names=tuple(names),
    )


def save_annotations(seq: ProcedureSequence, path: str) -> None:
    """Write a sequence in ``generic_csv`` form (phase column if present)."""
    names = seq.names or tuple(f"inst_{k}" for k in range(seq.n_instruments))
    buf = io.StringIO()
    header = ["frame"] + list(names) + (["phase"] if seq.phase is not None else [])
    buf.write(",".join(header) + "\n")
    for i in range(seq.n_frames):
        row = [str(i)] + [str(int(v)) for v in seq.presence[i]]
        if seq.phase is not None:
            row.append(str(int(seq.phase[i])))
        buf.write(",".join(row) + "\n")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# Feature files
# ---------------------------------------------------------------------------

def save_features(features: np.ndarray, path: str, format: str = "csv") -> None:
    """Write per-frame features as CSV or raw little-endian float32 rows.

    The binary format stores a one-line sidecar header ``F=<dim> n=<frames>``
    at ``path + '.hdr'``.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a (n, F) array")
    if format == "csv":
        np.savetxt(path, features, delimiter=",", fmt="%.17g")
    elif format == "binary":
        features.astype("<f4").tofile(path)
        with open(path + ".hdr", "w", encoding="utf-8") as fh:
            fh.write(f"F={features.shape[1]} n={features.shape[0]}\n")
    else:
        raise ValueError(f"unknown feature format {format!r}")


def load_features(path: str) -> np.ndarray:
    """Read a feature file written by :func:`save_features` (either format)."""
    if os.path.exists(path + ".hdr"):
        with open(path + ".hdr", "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
        try:
            fields = dict(part.split("=") for part in header.split())
            dim, n = int(fields["F"]), int(fields["n"])
        except (ValueError, KeyError):
            raise AnnotationParseError(f"{path}.hdr: malformed sidecar header {header!r}") from None
        raw = np.fromfile(path, dtype="<f4")
        if raw.size != dim * n:
            raise AnnotationParseError(
                f"{path}: expected {dim * n} float32 values per sidecar header, found {raw.size}"
            )
        return raw.reshape(n, dim).astype(np.float64)
    try:
        return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise AnnotationParseError(f"{path}: malformed feature CSV: {exc}") from None


def attach_features(seq: ProcedureSequence, source, seed: int = 0) -> ProcedureSequence:
    """Return a copy of ``seq`` with features from a file or a :class:`SimConfig`.

    A path source is loaded with :func:`load_features`; a :class:`SimConfig`
    source emits synthetic features from the sequence's own presence and
    phase tracks.  Presence and phase are never modified.
    """
    if isinstance(source, SimConfig):
        rng = np.random.default_rng(seed)
        feats = emit_features(seq.presence, seq.phase, source, rng)
    else:
        feats = load_features(os.fspath(source))
    if feats.shape[0] != seq.n_frames:
        raise ValueError(
            f"feature rows ({feats.shape[0]}) do not match sequence length ({seq.n_frames})"
        )
    return replace(seq, features=feats)
