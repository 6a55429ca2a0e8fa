import hashlib
from dataclasses import dataclass, field, fields
from typing import Dict, Optional

import numpy as np

METRICS_COLUMNS = (
    "iteration", "epoch", "wall_time_s", "train_loss", "train_acc", "test_loss", "test_acc",
    "delta", "rho", "gamma", "accepted", "pairs_stored",
)


class RecordModel:
    """Shared dictionary round-trip for the records a run produces."""

    @classmethod
    def from_dict(cls, data):
        names = {item.name for item in fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in names})

    @staticmethod
    def ignore_key(key):
        return key.startswith('_')

    def get_self_json(self):
        return {key: value for key, value in self.__dict__.items() if not self.ignore_key(key)}

    def json(self):
        return self.get_self_json()


@dataclass(frozen=True)
class MetricsRecord(RecordModel):
    iteration: int
    epoch: int
    wall_time_s: float
    train_loss: Optional[float]
    train_acc: Optional[float]
    test_loss: Optional[float]
    test_acc: Optional[float]
    delta: Optional[float]
    rho: Optional[float]
    gamma: Optional[float]
    accepted: bool
    pairs_stored: int
    grad_norm: Optional[float] = None

    def csv_row(self):
        """
        The function `csv_row` renders the record in `METRICS_COLUMNS` order. Floats are written with
        `repr` so they read back bit for bit; missing values become empty cells.
        """
        row = []
        for column in METRICS_COLUMNS:
            value = getattr(self, column)
            if value is None:
                row.append('')
            elif isinstance(value, bool):
                row.append('1' if value else '0')
            elif isinstance(value, float):
                row.append(repr(value))
            else:
                row.append(str(value))
        return row

    def without_wall_time(self):
        data = self.get_self_json()
        data.pop("wall_time_s")
        return data


@dataclass(frozen=True)
class RunManifest(RecordModel):
    config: Dict
    seed: int
    dataset_checksum: Optional[str]
    started_at: str
    metrics_path: str
    manifest_path: str
    method: str = ''
    status: str = 'running'
    records_written: int = 0
    finished_at: Optional[str] = None
    error: Optional[str] = None
    extra: Dict = field(default_factory=dict)


def dataset_checksum(*arrays):
    """SHA-256 over the raw bytes of the given arrays, or None when there are none."""
    present = [array for array in arrays if array is not None]
    if not present:
        return None
    digest = hashlib.sha256()
    for array in present:
        array = np.ascontiguousarray(array)
        digest.update(str(array.dtype).encode())
        digest.update(str(array.shape).encode())
        digest.update(array.tobytes())
    return digest.hexdigest()
