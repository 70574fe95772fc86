"""Bootstrap comparison of two score lists from repeated runs."""

from __future__ import annotations

import random
from typing import Sequence

from .errors import ContractError


def bootstrap_significance(
    runs_a: Sequence[float],
    runs_b: Sequence[float],
    resamples: int = 10000,
    seed: int = 0,
    paired: bool = True,
) -> float:
    """Bootstrap estimate of P(mean_a <= mean_b); small values favor a.

    Paired mode resamples run indices jointly (runs must align one-to-one,
    e.g. per-seed scores); unpaired mode resamples each list independently.
    Exact mean ties count one half, so identical inputs give exactly 0.5.
    Deterministic for a given seed.
    """
    a = [float(x) for x in runs_a]
    b = [float(x) for x in runs_b]
    if len(a) < 2 or len(b) < 2:
        raise ContractError("need at least two scores per side")
    if resamples < 1000:
        raise ContractError("resamples must be >= 1000")
    if paired and len(a) != len(b):
        raise ContractError(
            f"paired mode needs equal sizes, got {len(a)} vs {len(b)}"
        )
    rng = random.Random(seed)
    mass = 0.0
    for _ in range(resamples):
        if paired:
            idx = [rng.randrange(len(a)) for _ in range(len(a))]
            mean_a = sum(a[i] for i in idx) / len(idx)
            mean_b = sum(b[i] for i in idx) / len(idx)
        else:
            sample_a = [a[rng.randrange(len(a))] for _ in range(len(a))]
            sample_b = [b[rng.randrange(len(b))] for _ in range(len(b))]
            mean_a = sum(sample_a) / len(sample_a)
            mean_b = sum(sample_b) / len(sample_b)
        if mean_a < mean_b:
            mass += 1.0
        elif mean_a == mean_b:
            mass += 0.5
    return mass / resamples
