from __future__ import annotations

from typing import Optional

import numpy as np  # type: ignore


class Range:
    """A closed interval of numbers drawn with a caller-supplied generator."""

    def __init__(self, value: float = 0, stop: Optional[float] = None):
        self._value = value
        self._stop = value if stop is None else stop

        if self._value > self._stop:
            self._value, self._stop = self._stop, self._value

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        if self._value == self._stop:
            return self._value if size is None else np.full(size, float(self._value))
        return rng.uniform(self._value, self._stop, size)

    def sample_int(self, rng: np.random.Generator) -> int:
        return int(rng.integers(int(self._value), int(self._stop), endpoint=True))

    def __str__(self):
        if self._value == self._stop:
            return str(self._value)
        else:
            return f"{self._value}-{self._stop}"

    def __repr__(self):
        return f"Range({self._value!r}, {self._stop!r})"
