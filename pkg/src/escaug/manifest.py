"""Dataset manifests: ingestion validation and the canonical CSV format.

The source metadata CSV uses columns {slice_file_name, fold, classID,
class} with audio laid out as <dataset_dir>/fold<fold>/<slice_file_name>.
The canonical manifest produced by ingestion (and extended by the
augmentation stages) has columns {file, fold, class_id, class_name,
origin} where origin is one of original, classical_aug, gan.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

ORIGINS = ("original", "classical_aug", "gan")
N_FOLDS = 10


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestRow:
    file: str                 # path relative to the dataset/output root
    fold: int
    class_id: int
    class_name: str
    origin: str = "original"


def _validate_rows(rows: list[ManifestRow], require_full_folds: bool) -> None:
    problems = []
    seen: dict[str, int] = {}
    id_to_name: dict[int, str] = {}
    for i, row in enumerate(rows, start=1):
        if row.origin not in ORIGINS:
            problems.append(f"row {i}: origin {row.origin!r} not in {ORIGINS}")
        if not 1 <= row.fold <= N_FOLDS:
            problems.append(f"row {i}: fold {row.fold} outside 1..{N_FOLDS}")
        if row.class_id < 0:
            problems.append(f"row {i}: negative class id {row.class_id}")
        if row.file in seen:
            problems.append(f"row {i}: duplicate file {row.file!r} (first at row {seen[row.file]})")
        else:
            seen[row.file] = i
        known = id_to_name.setdefault(row.class_id, row.class_name)
        if known != row.class_name:
            problems.append(f"row {i}: class id {row.class_id} named {row.class_name!r} but previously {known!r}")
    if id_to_name:
        ids = sorted(id_to_name)
        if ids != list(range(len(ids))):
            problems.append(f"class ids {ids} are not dense 0..{len(ids) - 1}")
    if require_full_folds:
        folds = {r.fold for r in rows}
        missing = sorted(set(range(1, N_FOLDS + 1)) - folds)
        if missing:
            problems.append(f"folds {missing} have no clips")
    if problems:
        raise ManifestError("manifest validation failed:\n  " + "\n  ".join(problems))


def ingest(dataset_dir, manifest_csv) -> list[ManifestRow]:
    """Validate a source metadata CSV against the audio tree.

    Every referenced file must exist; failures are reported as one
    itemized error listing each bad row.
    """
    dataset_dir = Path(dataset_dir)
    with open(manifest_csv, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"slice_file_name", "fold", "classID", "class"}
        have = set(reader.fieldnames or [])
        if not required <= have:
            raise ManifestError(f"metadata CSV missing columns {sorted(required - have)}")
        rows: list[ManifestRow] = []
        problems: list[str] = []
        for i, rec in enumerate(reader, start=1):
            try:
                fold = int(rec["fold"])
                class_id = int(rec["classID"])
            except ValueError:
                problems.append(f"row {i}: non-integer fold/classID {rec['fold']!r}/{rec['classID']!r}")
                continue
            rel = f"fold{fold}/{rec['slice_file_name']}"
            if not (dataset_dir / rel).is_file():
                problems.append(f"row {i}: missing audio file {dataset_dir / rel}")
            rows.append(ManifestRow(rel, fold, class_id, rec["class"], "original"))
    if problems:
        raise ManifestError("ingest failed:\n  " + "\n  ".join(problems))
    if not rows:
        raise ManifestError("metadata CSV has no data rows")
    _validate_rows(rows, require_full_folds=True)
    return rows


def format_manifest(rows: list[ManifestRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["file", "fold", "class_id", "class_name", "origin"])
    for r in rows:
        writer.writerow([r.file, r.fold, r.class_id, r.class_name, r.origin])
    return buf.getvalue()


def save_manifest(path, rows: list[ManifestRow]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_manifest(rows))


def load_manifest(path, validate: bool = True) -> list[ManifestRow]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"file", "fold", "class_id", "class_name", "origin"}
        have = set(reader.fieldnames or [])
        if not required <= have:
            raise ManifestError(f"manifest {path} missing columns {sorted(required - have)}")
        rows = []
        for i, rec in enumerate(reader, start=1):
            try:
                rows.append(ManifestRow(rec["file"], int(rec["fold"]), int(rec["class_id"]),
                                        rec["class_name"], rec["origin"]))
            except ValueError:
                raise ManifestError(f"manifest {path} row {i}: non-integer fold/class_id") from None
    if validate:
        _validate_rows(rows, require_full_folds=False)
    return rows


def class_names(rows: list[ManifestRow]) -> dict[int, str]:
    return {r.class_id: r.class_name for r in rows}
