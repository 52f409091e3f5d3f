"""Dataset model and directory-layout ingestion.

A dataset directory holds:

* ``labels.csv`` (optional) with header ``subject_id,label``; label 0 is
  control, 1 is the positive class. Absent file means unlabeled data.
* per subject, either ``<subject_id>.conn.csv`` — first line ``V``, then V
  lines of V comma-separated decimals — or ``<subject_id>.ts.csv`` — first
  line ``L,V``, then L lines of V decimals. When both exist the matrix file
  wins; connectomes are computed from the series otherwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .connectome import Connectome, pearson_connectome, validate_time_series

__all__ = ["Sample", "Dataset", "DatasetError", "load_dataset", "write_dataset",
           "read_connectome_file", "write_connectome_file"]


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    subject_id: str
    connectome: Connectome
    label: int | None = None
    time_series: np.ndarray | None = None

    def __post_init__(self):
        if self.label is not None and self.label not in (0, 1):
            raise DatasetError(f"{self.subject_id}: label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...] = field(default_factory=tuple)

    def __post_init__(self):
        sizes = {s.connectome.n_nodes for s in self.samples}
        if len(sizes) > 1:
            raise DatasetError(f"mixed node counts across samples: {sorted(sizes)}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    @property
    def n_nodes(self) -> int:
        if not self.samples:
            raise DatasetError("empty dataset has no node count")
        return self.samples[0].connectome.n_nodes

    @property
    def labels(self) -> list[int | None]:
        return [s.label for s in self.samples]

    def labeled(self) -> "Dataset":
        return Dataset(tuple(s for s in self.samples if s.label is not None))

    def subset(self, ids: set[str]) -> "Dataset":
        return Dataset(tuple(s for s in self.samples if s.subject_id in ids))


# ---------------------------------------------------------------------------
# file parsing

_SYMMETRY_TOL = 1e-8


def _parse_floats(line: str, expected: int, where: str) -> np.ndarray:
    parts = line.strip().split(",")
    if len(parts) != expected:
        raise DatasetError(f"{where}: expected {expected} values, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise DatasetError(f"{where}: malformed number ({exc})") from exc


def read_connectome_file(path: Path) -> Connectome:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise DatasetError(f"{path.name}: empty file")
    try:
        n = int(lines[0].strip())
    except ValueError as exc:
        raise DatasetError(f"{path.name}: malformed matrix header") from exc
    if len(lines) - 1 != n:
        raise DatasetError(f"{path.name}: malformed matrix: header says {n} rows, "
                           f"found {len(lines) - 1}")
    rows = [_parse_floats(lines[i + 1], n, f"{path.name} row {i}") for i in range(n)]
    m = np.vstack(rows)
    if not np.isfinite(m).all():
        raise DatasetError(f"{path.name}: non-finite matrix entries")
    # tolerate roundoff from text serialization, nothing more
    if np.abs(m - m.T).max() > _SYMMETRY_TOL:
        raise DatasetError(f"{path.name}: matrix is not symmetric")
    if np.abs(np.diagonal(m) - 1.0).max() > _SYMMETRY_TOL:
        raise DatasetError(f"{path.name}: matrix diagonal is not 1")
    if np.abs(m).max() > 1.0 + _SYMMETRY_TOL:
        raise DatasetError(f"{path.name}: matrix entries outside [-1, 1]")
    m = (m + m.T) / 2.0
    np.clip(m, -1.0, 1.0, out=m)
    np.fill_diagonal(m, 1.0)
    return Connectome(m)


def read_time_series_file(path: Path) -> np.ndarray:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise DatasetError(f"{path.name}: empty file")
    header = lines[0].split(",")
    if len(header) != 2:
        raise DatasetError(f"{path.name}: malformed series header (want 'L,V')")
    try:
        length, n = int(header[0]), int(header[1])
    except ValueError as exc:
        raise DatasetError(f"{path.name}: malformed series header") from exc
    if len(lines) - 1 != length:
        raise DatasetError(f"{path.name}: malformed series: header says {length} rows, "
                           f"found {len(lines) - 1}")
    rows = [_parse_floats(lines[i + 1], n, f"{path.name} row {i}") for i in range(length)]
    try:
        return validate_time_series(np.vstack(rows))
    except ValueError as exc:
        raise DatasetError(f"{path.name}: {exc}") from exc


def _read_labels(path: Path) -> dict[str, int]:
    labels: dict[str, int] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["subject_id", "label"]:
            raise DatasetError(f"{path.name}: expected header 'subject_id,label'")
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise DatasetError(f"{path.name}: malformed row {row!r}")
            sid = row[0].strip()
            try:
                label = int(row[1])
            except ValueError as exc:
                raise DatasetError(f"{path.name}: malformed label for {sid!r}") from exc
            if label not in (0, 1):
                raise DatasetError(f"{path.name}: label for {sid!r} outside {{0,1}}: {label}")
            if sid in labels:
                raise DatasetError(f"{path.name}: duplicate subject {sid!r}")
            labels[sid] = label
    return labels


def load_dataset(path) -> Dataset:
    """Load every subject found in a dataset directory, sorted by id."""
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")

    conn_files = {p.name[:-len(".conn.csv")]: p for p in root.glob("*.conn.csv")}
    ts_files = {p.name[:-len(".ts.csv")]: p for p in root.glob("*.ts.csv")}
    subject_ids = sorted(set(conn_files) | set(ts_files))
    if not subject_ids:
        raise DatasetError(f"{root}: no *.conn.csv or *.ts.csv files found")

    labels_path = root / "labels.csv"
    labels = _read_labels(labels_path) if labels_path.exists() else {}
    orphans = sorted(set(labels) - set(subject_ids))
    if orphans:
        raise DatasetError(f"labels.csv names subjects with no data file: {orphans}")

    samples = []
    for sid in subject_ids:
        ts = read_time_series_file(ts_files[sid]) if sid in ts_files else None
        if sid in conn_files:
            conn = read_connectome_file(conn_files[sid])
        else:
            conn = pearson_connectome(ts)
        samples.append(Sample(subject_id=sid, connectome=conn,
                              label=labels.get(sid), time_series=ts))
    return Dataset(tuple(samples))


# ---------------------------------------------------------------------------
# writing (used by the synth and augment CLI verbs)

def write_connectome_file(path: Path, conn: Connectome) -> None:
    n = conn.n_nodes
    lines = [str(n)]
    for row in conn.matrix:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_time_series_file(path: Path, ts: np.ndarray) -> None:
    arr = validate_time_series(ts)
    lines = [f"{arr.shape[0]},{arr.shape[1]}"]
    for row in arr:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_dataset(path, ds: Dataset, *, as_time_series: bool = True) -> None:
    """Write a dataset in the directory layout ``load_dataset`` reads."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    labeled = [s for s in ds if s.label is not None]
    if labeled:
        lines = ["subject_id,label"]
        lines += [f"{s.subject_id},{s.label}" for s in labeled]
        (root / "labels.csv").write_text("\n".join(lines) + "\n")
    for s in ds:
        if as_time_series and s.time_series is not None:
            write_time_series_file(root / f"{s.subject_id}.ts.csv", s.time_series)
        else:
            write_connectome_file(root / f"{s.subject_id}.conn.csv", s.connectome)
