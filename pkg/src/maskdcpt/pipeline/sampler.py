"""Repeat sampler for long-tailed, multi-family corpora."""

from __future__ import annotations

import re
import warnings
from collections import Counter
from typing import Mapping

import numpy as np

from ..degrade.ops import Family
from ..errors import InvalidParameterError
from ..seeding import derive_seed


def parse_factors(spec) -> dict[Family, int]:
    """Accept a mapping or the compact ``"[1H, 300RS, 15GN, 5MB, 60LL]"`` form."""
    if isinstance(spec, Mapping):
        return {Family.parse(k): int(v) for k, v in spec.items()}
    out = {}
    for tok in re.findall(r"(\d+)\s*([A-Za-z_]+)", str(spec)):
        out[Family.parse(tok[1])] = int(tok[0])
    return out


def effective_counts(counts: Mapping, factors: Mapping) -> dict[Family, int]:
    counts = {Family.parse(k): int(v) for k, v in counts.items()}
    factors = parse_factors(factors)
    return {f: n * factors.get(f, 1) for f, n in counts.items()}


class RepeatSampler:
    """Each epoch is a seeded shuffle of every sample repeated ``factor(family)`` times.

    Positions are addressed statelessly: position ``p`` lives in epoch
    ``p // len(self)``, so a run can resume at any batch without replaying.
    """

    def __init__(self, labels, factors=None, seed: int = 0):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.seed = int(seed)
        factors = parse_factors(factors or {})
        present = {Family(int(l)) for l in np.unique(self.labels)}
        for fam in sorted(set(factors) - present):
            warnings.warn(f"repeat factor given for absent family {fam.name}; ignored", stacklevel=2)
        self.factors = {f: factors.get(f, 1) for f in sorted(present)}
        for f, r in self.factors.items():
            if r < 1:
                raise InvalidParameterError(f"repeat factor for {f.name} must be >= 1, got {r}")
        reps = np.array([self.factors[Family(int(l))] for l in self.labels], dtype=np.int64)
        self._base = np.repeat(np.arange(len(self.labels)), reps)
        self._cache: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return int(self._base.size)

    def epoch(self, e: int) -> np.ndarray:
        if e not in self._cache:
            if len(self._cache) > 4:
                self._cache.clear()
            rng = np.random.default_rng(derive_seed(self.seed, "epoch", e))
            self._cache[e] = self._base[rng.permutation(self._base.size)]
        return self._cache[e]

    def __iter__(self):
        return iter(self.epoch(0).tolist())

    def positions(self, start: int, count: int) -> list[int]:
        if len(self) == 0:
            raise InvalidParameterError("cannot sample from an empty corpus")
        out = []
        for p in range(start, start + count):
            e, i = divmod(p, len(self))
            out.append(int(self.epoch(e)[i]))
        return out

    def batch(self, b: int, batch_size: int) -> list[int]:
        return self.positions(b * batch_size, batch_size)

    def histogram(self, e: int = 0) -> dict[Family, int]:
        c = Counter(int(self.labels[i]) for i in self.epoch(e))
        return {Family(k): v for k, v in sorted(c.items())}


def make_repeat_sampler(corpus, factors=None, seed: int = 0) -> RepeatSampler:
    return RepeatSampler(corpus.labels, factors, seed)
