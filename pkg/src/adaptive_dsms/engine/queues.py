"""Bounded FIFO input queue with drop-tail overflow."""

from __future__ import annotations

import enum
from collections import deque

from .tuples import Tuple

__all__ = ["BoundedQueue", "Admission", "enqueue"]


class Admission(enum.Enum):
    ACCEPTED = "accepted"
    DROPPED = "dropped"

    def __bool__(self) -> bool:
        return self is Admission.ACCEPTED


class BoundedQueue:
    """FIFO buffer of at most ``capacity`` tuples.

    ``enqueued`` counts every offer, accepted or not, so that
    ``enqueued == dequeued + dropped + len(queue)`` always holds.  One
    producer and one consumer may use the queue from different threads:
    each counter has a single writer and deque append/popleft are atomic.
    """

    __slots__ = ("capacity", "resident", "enqueued", "dequeued", "dropped")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.resident: deque[Tuple] = deque()
        self.enqueued = 0
        self.dequeued = 0
        self.dropped = 0

    def __len__(self) -> int:
        return len(self.resident)

    def __bool__(self) -> bool:
        return bool(self.resident)

    def offer(self, t: Tuple) -> bool:
        self.enqueued += 1
        if len(self.resident) < self.capacity:
            self.resident.append(t)
            return True
        self.dropped += 1
        return False

    def pop(self) -> Tuple:
        t = self.resident.popleft()
        self.dequeued += 1
        return t

    def resize(self, capacity: int) -> list[Tuple]:
        """Change capacity; on shrink the newest overflow tuples are evicted and counted as drops."""
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        evicted = []
        while len(self.resident) > self.capacity:
            evicted.append(self.resident.pop())
        evicted.reverse()
        self.dropped += len(evicted)
        return evicted

    def balanced(self) -> bool:
        return self.enqueued == self.dequeued + self.dropped + len(self.resident)


def enqueue(queue: BoundedQueue, t: Tuple) -> Admission:
    return Admission.ACCEPTED if queue.offer(t) else Admission.DROPPED
