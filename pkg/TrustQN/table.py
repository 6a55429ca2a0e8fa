import csv
import json
import logging
import os

from TrustQN.exceptions import TrustQNError
from TrustQN.models import METRICS_COLUMNS, MetricsRecord, RunManifest
from TrustQN.utills import TimeUtills

METRICS_FILE = "metrics.csv"
MANIFEST_FILE = "manifest.json"


class MetricsTable:
    """
    One run directory holding `metrics.csv` (one row per iteration) and `manifest.json` (config, seed,
    dataset checksum and final status).
    """

    def _handle_error(self, operation, error):
        """
        The function `_handle_error` logs an error message and raises the error.

        :param operation: The `operation` parameter names the file operation that failed
        :param error: The `error` parameter is the exception raised by that operation
        """
        self.__logger.error("Error during %s: %s", operation, error)
        raise error

    @staticmethod
    def _create_run_dir(output_dir, run_name):
        """
        The function `_create_run_dir` creates `output_dir/run_name`, appending `-1`, `-2`, ... when a run
        with the same name already exists.

        :return: the created directory path.
        """
        os.makedirs(output_dir, exist_ok=True)
        candidate = os.path.join(output_dir, run_name)
        suffix = 0
        while True:
            try:
                os.mkdir(candidate)
                return candidate
            except FileExistsError:
                suffix += 1
                candidate = os.path.join(output_dir, f"{run_name}-{suffix}")

    @classmethod
    def create_run(cls, output_dir, config, dataset_checksum=None, extra=None):
        """
        The function `create_run` opens a fresh run directory named `{method}-seed{seed}-{stamp}`.

        :param output_dir: The `output_dir` parameter is the directory runs are collected under
        :param config: The `config` parameter is the `TrainConfig` of the run
        :param dataset_checksum: The `dataset_checksum` parameter identifies the training data (optional)
        :param extra: The `extra` parameter holds additional manifest fields (optional)
        :return: a `MetricsTable`.
        """
        run_name = f"{config.method}-seed{config.seed}-{TimeUtills.get_run_stamp()}"
        try:
            run_dir = cls._create_run_dir(output_dir, run_name)
        except OSError as e:
            logging.getLogger(__name__).error("Error during %s: %s", "run directory creation", e)
            raise TrustQNError(f"Cannot create run directory under '{output_dir}': {e}")
        return cls(run_dir, config, dataset_checksum, extra)

    def __init__(self, run_dir, config, dataset_checksum=None, extra=None):
        self.__logger = logging.getLogger(__name__)
        self.__run_dir = run_dir
        self.__metrics_path = os.path.join(run_dir, METRICS_FILE)
        self.__manifest = RunManifest(
            config=config.get_self_json(), seed=config.seed, dataset_checksum=dataset_checksum,
            started_at=TimeUtills.get_current_utc_datetime(), metrics_path=self.__metrics_path,
            manifest_path=os.path.join(run_dir, MANIFEST_FILE), method=config.method,
            extra=dict(extra or {}))
        self.__records_written = 0
        try:
            with open(self.__metrics_path, "w", newline="", encoding="utf-8") as handle:
                csv.writer(handle).writerow(METRICS_COLUMNS)
        except OSError as e:
            self._handle_error("metrics header write", e)
        self._write_manifest()
        self.__logger.info("Writing run to %s", run_dir)

    def get_run_dir(self):
        return self.__run_dir

    def get_metrics_path(self):
        return self.__metrics_path

    def get_manifest(self):
        return self.__manifest

    def _write_manifest(self):
        try:
            with open(self.__manifest.manifest_path, "w", encoding="utf-8") as handle:
                json.dump(self.__manifest.get_self_json(), handle, indent=2, sort_keys=True)
        except OSError as e:
            self._handle_error("manifest write", e)

    def save(self, record):
        """
        The function `save` appends one iteration record to `metrics.csv`.

        :param record: The `record` parameter is a `MetricsRecord`
        :return: the record.
        """
        return self.batch_write([record])[0]

    def batch_write(self, records):
        """
        The function `batch_write` appends records to `metrics.csv` in order.

        :param records: The `records` parameter is a list of `MetricsRecord`
        :return: the records written.
        """
        try:
            with open(self.__metrics_path, "a", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                for record in records:
                    writer.writerow(record.csv_row())
        except OSError as e:
            self._handle_error("metrics write", e)
        self.__records_written += len(records)
        return records

    def finish(self, status="completed", error=None, **extra):
        """
        The function `finish` stamps the manifest with the final status, the number of rows written and,
        for failed runs, the error message.

        :return: the final `RunManifest`.
        """
        data = self.__manifest.get_self_json()
        data.update(status=status, records_written=self.__records_written,
                    finished_at=TimeUtills.get_current_utc_datetime(),
                    error=None if error is None else str(error))
        data["extra"] = {**data["extra"], **extra}
        self.__manifest = RunManifest.from_dict(data)
        self._write_manifest()
        self.__logger.info("Run %s %s with %d records", self.__run_dir, status, self.__records_written)
        return self.__manifest

    @staticmethod
    def read_metrics(path):
        """
        The function `read_metrics` loads a `metrics.csv` back into dictionaries keyed by column, with
        empty cells as None and every other value as float.
        """
        rows = []
        with open(path, "r", newline="", encoding="utf-8") as handle:
            for row in csv.DictReader(handle):
                rows.append({key: (float(value) if value != '' else None) for key, value in row.items()})
        return rows

    @staticmethod
    def record_from_row(row):
        data = dict(row)
        for key in ("iteration", "epoch", "pairs_stored"):
            data[key] = int(data[key])
        data["accepted"] = bool(data["accepted"])
        return MetricsRecord.from_dict(data)
