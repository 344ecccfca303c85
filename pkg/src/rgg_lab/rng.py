"""Counter-based seeded random streams.

Every stochastic routine takes an explicit :class:`numpy.random.Generator`.
Replicate ``r`` of a run seeded with ``seed`` draws from ``stream(seed, r)``, so
any replicate can be regenerated on its own and parallel workers never share
state.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return the Philox stream addressed by ``(seed, *keys)``.

    Args:
        seed: Non-negative root seed.
        keys: Non-negative sub-stream indices (replicate, chunk, grid point, ...).

    Example:
        >>> a = stream(7, 3).standard_normal(2)
        >>> b = stream(7, 3).standard_normal(2)
        >>> bool((a == b).all())
        True
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


def child_seed(seed: int, *keys: int) -> int:
    """Derive a 63-bit seed for a sub-experiment addressed by ``keys``."""
    state = np.random.SeedSequence([seed, *keys]).generate_state(1, dtype=np.uint64)
    return int(state[0]) >> 1
