import time
from datetime import datetime, timezone


class TimeUtills:
    @classmethod
    def get_current_utc_datetime(cls):
        """
        The function `get_current_utc_datetime` returns the current UTC datetime in the format "YYYY-MM-DD
        HH:MM:SS".
        """
        return datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M:%S")

    @classmethod
    def get_run_stamp(cls):
        """
        The function `get_run_stamp` returns the current UTC time in a form usable inside a directory name,
        e.g. "20240131T120501Z".
        """
        return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


class WallClock:
    """Monotonic seconds elapsed since construction."""

    def __init__(self):
        self.__start = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self.__start
