"""Small shared helpers for assignment enumeration."""

from __future__ import annotations

import numpy as np

__all__ = ["assignment_bits"]


def assignment_bits(n):
    """All assignments in {1,2}^n in lexicographic order (bond 0 most significant)."""
    count = 1 << n
    codes = np.arange(count, dtype=np.uint32)
    bits = (codes[:, None] >> np.arange(n - 1, -1, -1, dtype=np.uint32)) & 1
    return (bits + 1).astype(np.int8)
