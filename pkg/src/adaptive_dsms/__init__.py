"""A small data-stream engine whose runtime parameters are tuned online by a learning automaton."""

__version__ = "0.1.0"
