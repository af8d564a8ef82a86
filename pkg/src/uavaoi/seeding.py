"""Named, independent random streams derived from one integer seed.

Every algorithm run with the same seed sees the same sensor layout and the same
sequence of episode start states, so learners and baselines are compared on
identical scenarios.
"""
from __future__ import annotations

import numpy as np

_STREAMS = ("scenario", "reset", "init", "act", "opt")


def streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(_STREAMS, children)}


def episode_seeds(seed: int, n: int) -> np.ndarray:
    return streams(seed)["reset"].integers(0, 2**63 - 1, size=n)
