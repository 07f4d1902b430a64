"""Profiling traces: ingestion, train/test split and design matrices."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional

import numpy as np

from daleel.regress import BasisSpec, DesignMatrix, expand_many

RUN_COLUMNS = (
    "timestamp",
    "instance_name",
    "vcpu",
    "ram_gb",
    "price_per_hour",
    "day_of_week",
    "execution_time_s",
    "app_id",
)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class RunRecord:
    timestamp: datetime
    instance_name: str
    vcpu: int
    ram_gb: float
    price_per_hour: float
    day_of_week: int  # 1 = Monday
    execution_time_s: float
    app_id: str

    def __post_init__(self):
        if self.day_of_week != self.timestamp.isoweekday():
            raise DatasetError(
                f"day_of_week {self.day_of_week} does not match timestamp "
                f"{self.timestamp.isoformat()} (weekday {self.timestamp.isoweekday()})"
            )
        if not (self.execution_time_s > 0 and math.isfinite(self.execution_time_s)):
            raise DatasetError(f"execution_time_s must be positive, got {self.execution_time_s}")
        if self.vcpu < 1:
            raise DatasetError(f"vcpu must be >= 1, got {self.vcpu}")
        if not self.ram_gb > 0:
            raise DatasetError(f"ram_gb must be positive, got {self.ram_gb}")
        if not self.price_per_hour > 0:
            raise DatasetError(f"price_per_hour must be positive, got {self.price_per_hour}")

    @property
    def predictors(self) -> tuple:
        return (self.ram_gb, self.vcpu, self.day_of_week)


@dataclass(frozen=True)
class Dataset:
    records: tuple
    provenance: str = ""

    def __post_init__(self):
        records = tuple(self.records)
        apps = {r.app_id for r in records}
        if len(apps) > 1:
            raise DatasetError(f"records span several applications: {sorted(apps)}")
        object.__setattr__(self, "records", records)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def app_id(self) -> Optional[str]:
        return self.records[0].app_id if self.records else None

    def subset(self, idx, provenance=None) -> "Dataset":
        return Dataset(tuple(self.records[i] for i in idx), provenance or self.provenance)

    def predictor_array(self) -> np.ndarray:
        return np.array([r.predictors for r in self.records], dtype=float).reshape(-1, 3)

    def response(self) -> np.ndarray:
        return np.array([r.execution_time_s for r in self.records], dtype=float)


def _parse_row(row: dict, index: int) -> RunRecord:
    try:
        ts = datetime.fromisoformat(row["timestamp"].strip())
        day_raw = (row.get("day_of_week") or "").strip()
        day = ts.isoweekday() if not day_raw else int(day_raw)
        vcpu_f = float(row["vcpu"])
        if vcpu_f != int(vcpu_f):
            raise ValueError(f"vcpu must be an integer, got {row['vcpu']!r}")
        return RunRecord(
            timestamp=ts,
            instance_name=row["instance_name"].strip(),
            vcpu=int(vcpu_f),
            ram_gb=float(row["ram_gb"]),
            price_per_hour=float(row["price_per_hour"]),
            day_of_week=day,
            execution_time_s=float(row["execution_time_s"]),
            app_id=row["app_id"].strip(),
        )
    except (DatasetError, ValueError, TypeError, AttributeError) as exc:
        raise DatasetError(f"row {index}: {exc}") from exc


def parse_runs(lines, source: str = "<runs>") -> Dataset:
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise DatasetError(f"{source}: missing header")
    required = [c for c in RUN_COLUMNS if c != "day_of_week"]
    missing = [c for c in required if c not in reader.fieldnames]
    if missing:
        raise DatasetError(f"{source}: missing columns {missing}")
    # extra columns (storage, hypervisor, ...) are accepted and ignored
    records = [_parse_row(row, i) for i, row in enumerate(reader, start=1)]
    try:
        return Dataset(tuple(records), provenance=source)
    except DatasetError as exc:
        raise DatasetError(f"{source}: {exc}") from exc


def ingest_runs(path) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        try:
            return parse_runs(fh, source=str(path))
        except DatasetError as exc:
            if str(exc).startswith(str(path)):
                raise
            raise DatasetError(f"{path}: {exc}") from exc


def write_runs(dataset: Dataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for r in dataset:
            w.writerow([
                r.timestamp.isoformat(),
                r.instance_name,
                r.vcpu,
                repr(float(r.ram_gb)),
                repr(float(r.price_per_hour)),
                r.day_of_week,
                repr(float(r.execution_time_s)),
                r.app_id,
            ])


def split_sizes(n: int, train_fraction: float) -> tuple:
    n_train = int(math.floor(train_fraction * n + 0.5))
    return n_train, n - n_train


def split(d: Dataset, train_fraction: float = 0.57, seed: int = 42) -> tuple:
    """Seeded shuffle then prefix cut into (train, test)."""
    if not 0 < train_fraction < 1:
        raise DatasetError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(d)
    if n < 2:
        raise DatasetError(f"need at least 2 records to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train, _ = split_sizes(n, train_fraction)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    return (
        d.subset(train_idx, provenance=f"{d.provenance}[train]"),
        d.subset(test_idx, provenance=f"{d.provenance}[test]"),
    )


def to_design(d: Dataset, basis: BasisSpec) -> DesignMatrix:
    if len(d) == 0:
        raise DatasetError("cannot build a design matrix from an empty dataset")
    values = expand_many(d.predictor_array(), basis)
    return DesignMatrix(values, d.response(), tuple(basis.labels), basis)
