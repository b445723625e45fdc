"""The stream element flowing through the engine."""

from __future__ import annotations

__all__ = ["Tuple", "STREAM_WIDTHS"]

# Attribute count per source stream: TCP records carry a length, UDP ones do not.
STREAM_WIDTHS = {"tcp": 5, "udp": 4}


class Tuple:
    """Timestamped record of integer attributes.

    ``ts`` is the source timestamp and ``arrival`` the engine-clock time the
    tuple entered the system, both in milliseconds.  Latency is measured from
    ``arrival``: replayed traces carry historical source timestamps.
    """

    __slots__ = ("ts", "arrival", "attrs", "stream")

    def __init__(self, ts: float, arrival: float, attrs: tuple[int, ...], stream: str = "tcp"):
        if arrival < 0:
            raise ValueError(f"arrival must be non-negative, got {arrival}")
        self.ts = ts
        self.arrival = arrival
        self.attrs = attrs
        self.stream = stream

    @property
    def attr_count(self) -> int:
        return len(self.attrs)

    def derive(self, attrs: tuple[int, ...]) -> "Tuple":
        t = Tuple.__new__(Tuple)
        t.ts = self.ts
        t.arrival = self.arrival
        t.attrs = attrs
        t.stream = self.stream
        return t

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tuple):
            return NotImplemented
        return (self.ts, self.arrival, self.attrs, self.stream) == (other.ts, other.arrival, other.attrs, other.stream)

    def __hash__(self) -> int:
        return hash((self.ts, self.arrival, self.attrs, self.stream))

    def __repr__(self) -> str:
        return f"Tuple(ts={self.ts!r}, arrival={self.arrival!r}, attrs={self.attrs!r}, stream={self.stream!r})"
