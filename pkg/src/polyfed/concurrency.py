"""Reader-writer lock used by every store.

Many readers or one writer; writers are preferred once waiting so plans
cannot starve ingest indefinitely.
"""

import threading
from contextlib import contextmanager


class RwLock:
    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False
        self._writers_waiting = 0

    def acquire_read(self):
        with self._cond:
            while self._writer or self._writers_waiting:
                self._cond.wait()
            self._readers += 1

    def release_read(self):
        with self._cond:
            self._readers -= 1
            if self._readers == 0:
                self._cond.notify_all()

    def acquire_write(self):
        with self._cond:
            self._writers_waiting += 1
            try:
                while self._writer or self._readers:
                    self._cond.wait()
            finally:
                self._writers_waiting -= 1
            self._writer = True

    def release_write(self):
        with self._cond:
            self._writer = False
            self._cond.notify_all()

    @contextmanager
    def read(self):
        self.acquire_read()
        try:
            yield
        finally:
            self.release_read()

    @contextmanager
    def write(self):
        self.acquire_write()
        try:
            yield
        finally:
            self.release_write()


@contextmanager
def read_all(locks):
    """Hold read locks on several stores for a plan's duration.

    Locks are acquired in a stable order so two plans can never deadlock.
    """
    acquired = []
    try:
        for lock in locks:
            lock.acquire_read()
            acquired.append(lock)
        yield
    finally:
        for lock in reversed(acquired):
            lock.release_read()
