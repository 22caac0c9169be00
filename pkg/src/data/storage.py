"""
📦 Dataset container - a small self-describing binary format

Byte layout (all little-endian):

    offset  size  field
    0       4     magic b"OEEG"
    4       2     version (uint16, currently 1)
    6       2     reserved (uint16, 0)
    8       4     n_trials (uint32)
    12      4     channels C (uint32)
    16      4     samples per trial T (uint32)
    20      4     n_classes (uint32)
    24      8     sampling rate in Hz (float64)
    32      2     subject id length S (uint16)
    34      S     subject id (UTF-8)
    34+S    4*n   labels (int32)
    ...     4*n*C*T  samples (float32, trial-major, then channel, then time)

A JSON manifest with the same header fields (plus provenance and seed) is
written next to the container as `<path>.manifest.json`.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from src.core.enums import Provenance
from src.models.recording import Dataset, TrialRecording
from src.utils.errors import HeaderError, InvalidDataError, LabelRangeError, TruncationError

MAGIC = b"OEEG"
VERSION = 1
_FIXED = struct.Struct("<4sHHIIIIdH")


def manifest_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def save_dataset(dataset: Dataset, path: Path, extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    💾 Writes the container and its manifest

    Samples are stored as float32; datasets built by `synth_dataset` are
    already float32-exact, so save/load round-trips bit for bit.

    Raises:
        InvalidDataError: If the dataset violates its invariants
    """
    dataset.validate()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    subject = dataset.subject_id.encode("utf-8")
    header = _FIXED.pack(
        MAGIC,
        VERSION,
        0,
        len(dataset),
        dataset.channels,
        dataset.length,
        dataset.n_classes,
        float(dataset.rate_hz),
        len(subject),
    )
    labels = dataset.labels.astype("<i4")
    samples = dataset.samples().astype("<f4")
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(subject)
        handle.write(labels.tobytes())
        handle.write(samples.tobytes())

    manifest = {
        "format": "OEEG",
        "version": VERSION,
        "n_trials": len(dataset),
        "channels": dataset.channels,
        "samples": dataset.length,
        "n_classes": dataset.n_classes,
        "rate_hz": float(dataset.rate_hz),
        "subject_id": dataset.subject_id,
        "provenance": dataset.provenance.value,
        "seed": dataset.seed,
        "class_counts": dataset.class_counts().tolist(),
    }
    manifest.update(extra or {})
    manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logging.info(f"💾 Saved {len(dataset)} trials to {path}")
    return path


def load_dataset(path: Path) -> Dataset:
    """
    📂 Reads a container written by `save_dataset`

    Nothing is returned unless the whole file parses.

    Raises:
        HeaderError: Bad magic or version, or invalid header fields (e.g. C = 0)
        TruncationError: The file ends before the payload is complete
        LabelRangeError: A label is outside [0, n_classes)
        InvalidDataError: The file cannot be read or holds non-finite samples
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise InvalidDataError(f"cannot read dataset {path}: {e}") from e

    if len(blob) < _FIXED.size:
        raise TruncationError(f"header needs {_FIXED.size} bytes, file has {len(blob)}", len(blob))
    magic, version, _, n_trials, channels, samples, n_classes, rate_hz, subject_len = _FIXED.unpack_from(blob, 0)
    if magic != MAGIC:
        raise HeaderError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise HeaderError(f"unsupported version {version}", 4)
    for offset, name, value in ((8, "n_trials", n_trials), (12, "channels", channels),
                                (16, "samples", samples), (20, "n_classes", n_classes)):
        if value < 1:
            raise HeaderError(f"header field {name} must be >= 1, got {value}", offset)
    if not np.isfinite(rate_hz) or rate_hz <= 0:
        raise HeaderError(f"sampling rate must be positive, got {rate_hz}", 24)

    offset = _FIXED.size
    needed = offset + subject_len + 4 * n_trials + 4 * n_trials * channels * samples
    if len(blob) < needed:
        raise TruncationError(f"payload needs {needed} bytes, file has {len(blob)}", len(blob))
    if len(blob) > needed:
        raise HeaderError(f"{len(blob) - needed} unexpected trailing bytes", needed)

    try:
        subject_id = blob[offset : offset + subject_len].decode("utf-8")
    except UnicodeDecodeError as e:
        raise HeaderError(f"subject id is not UTF-8: {e}", offset) from e
    offset += subject_len

    labels = np.frombuffer(blob, dtype="<i4", count=n_trials, offset=offset)
    bad = np.flatnonzero((labels < 0) | (labels >= n_classes))
    if bad.size:
        raise LabelRangeError(
            f"trial {bad[0]} has label {labels[bad[0]]} outside [0, {n_classes})", offset + 4 * int(bad[0])
        )
    offset += 4 * n_trials

    values = np.frombuffer(blob, dtype="<f4", count=n_trials * channels * samples, offset=offset)
    values = values.astype(np.float64).reshape(n_trials, channels, samples)
    if not np.all(np.isfinite(values)):
        raise InvalidDataError(f"dataset {path} holds non-finite samples")

    trials = [
        TrialRecording(samples=values[i], rate_hz=float(rate_hz), label=int(labels[i]), subject_id=subject_id)
        for i in range(n_trials)
    ]
    seed = None
    provenance = Provenance.FILE
    meta_file = manifest_path(path)
    if meta_file.exists():
        try:
            meta = json.loads(meta_file.read_text(encoding="utf-8"))
            seed = meta.get("seed")
            provenance = Provenance(meta.get("provenance", Provenance.FILE.value))
        except (OSError, ValueError) as e:
            logging.warning(f"⚠️ Ignoring unreadable manifest {meta_file}: {e}")
    dataset = Dataset(
        trials=trials, n_classes=int(n_classes), subject_id=subject_id, provenance=provenance, seed=seed
    )
    logging.info(f"📂 Loaded {n_trials} trials ({channels} x {samples} @ {rate_hz} Hz) from {path}")
    return dataset
