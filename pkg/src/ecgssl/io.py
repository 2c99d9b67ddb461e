"""Recording file formats.

Two interchange formats are supported, one recording per entry:

CSV format (one file per recording)::

    subject,condition,score_arousal,score_valence,score_stress,sample_rate_hz
    s01,office,6.5,3.2,7.0,256
    0.012
    0.034
    ...

A single header row carries the metadata; every following line holds one
amplitude. Scores may be left empty for unlabeled recordings.

Manifest format (one directory per dataset)::

    manifest.csv   with header
        subject,condition,score_arousal,score_valence,score_stress,sample_rate_hz,n_samples,file
    <file>.f32     raw little-endian 32-bit floats, one per sample

``file`` paths are relative to the manifest's directory.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .signal import RawRecording

TARGETS = ("arousal", "valence", "stress")

_CSV_HEADER = ["subject", "condition", "score_arousal", "score_valence",
               "score_stress", "sample_rate_hz"]
_MANIFEST_HEADER = _CSV_HEADER + ["n_samples", "file"]


def _scores_from_row(row: dict[str, str]) -> dict[str, float]:
    scores = {}
    for target in TARGETS:
        raw = row.get(f"score_{target}", "").strip()
        if raw:
            scores[target] = float(raw)
    return scores


def _scores_to_row(rec: RawRecording) -> list[str]:
    return [f"{rec.condition_labels[t]:g}" if t in rec.condition_labels else ""
            for t in TARGETS]


def read_recording_csv(path: str | Path) -> RawRecording:
    path = Path(path)
    with path.open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _CSV_HEADER:
            raise ValidationError(f"{path}: expected header {','.join(_CSV_HEADER)}")
        meta = next(reader, None)
        if meta is None:
            raise ValidationError(f"{path}: missing metadata row")
        row = dict(zip(_CSV_HEADER, meta))
        samples = [float(line[0]) for line in reader if line]
    return RawRecording(
        samples=np.asarray(samples),
        sample_rate_hz=float(row["sample_rate_hz"]),
        subject_id=row["subject"],
        condition_labels=_scores_from_row({f"score_{t}": row[f"score_{t}"] for t in TARGETS}),
    )


def write_recording_csv(rec: RawRecording, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_HEADER)
        writer.writerow([rec.subject_id, "", *_scores_to_row(rec), f"{rec.sample_rate_hz:g}"])
        for v in rec.samples:
            writer.writerow([repr(float(v))])


def read_manifest(manifest_path: str | Path) -> list[RawRecording]:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.csv"
    base = manifest_path.parent
    recordings = []
    with manifest_path.open(newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != _MANIFEST_HEADER:
            raise ValidationError(f"{manifest_path}: expected header {','.join(_MANIFEST_HEADER)}")
        for row in reader:
            samples = np.fromfile(base / row["file"], dtype="<f4").astype(np.float64)
            if samples.size != int(row["n_samples"]):
                raise ValidationError(f"{row['file']}: sample count mismatch "
                                      f"({samples.size} vs {row['n_samples']})")
            recordings.append(RawRecording(
                samples=samples,
                sample_rate_hz=float(row["sample_rate_hz"]),
                subject_id=row["subject"],
                condition_labels=_scores_from_row(row),
            ))
    return recordings


def write_manifest(recordings: list[RawRecording], out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.csv"
    with manifest_path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_MANIFEST_HEADER)
        for i, rec in enumerate(recordings):
            fname = f"rec_{i:04d}_{rec.subject_id}.f32"
            rec.samples.astype("<f4").tofile(out_dir / fname)
            writer.writerow([rec.subject_id, "", *_scores_to_row(rec),
                             f"{rec.sample_rate_hz:g}", rec.samples.size, fname])
    return manifest_path


def read_recordings(path: str | Path) -> list[RawRecording]:
    """Load recordings from a manifest directory/file or a single CSV recording."""
    path = Path(path)
    if path.is_dir() or path.name == "manifest.csv":
        return read_manifest(path)
    return [read_recording_csv(path)]
