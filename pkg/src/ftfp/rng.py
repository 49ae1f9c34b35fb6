"""Deterministic random streams for the rounding algorithms.

Stream: splitmix64, version 1.  All randomized code in this package draws
64-bit words from :class:`SplitMix64` so that results are bit-identical
across platforms and Python versions.  Draw order conventions:

* one stream per rounding run, seeded with the run seed;
* within a run, primary clusters draw first, in creation order, then the
  independently opened facilities, in creation order;
* multi-trial estimators derive the seed for trial ``t`` as ``seed ^ t``.

A uniform rational in [0, 1) is ``u / 2**64`` for a drawn word ``u``.
Comparisons against rational thresholds are done in exact integer
arithmetic: ``u/2**64 < p/q`` iff ``u * q < p * 2**64``.
"""

from __future__ import annotations

from fractions import Fraction

STREAM_VERSION = 1

_MASK = (1 << 64) - 1
TWO64 = 1 << 64


class SplitMix64:
    """64-bit splitmix generator; tiny state, trivially reproducible."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def next_unit_fraction(self) -> Fraction:
        """Uniform rational in [0, 1) with denominator 2**64."""
        return Fraction(self.next_u64(), TWO64)


def trial_seed(seed: int, trial: int) -> int:
    """Derived seed for one trial of a multi-trial estimate."""
    return (seed ^ trial) & _MASK


def below(u: int, threshold: Fraction) -> bool:
    """Exact test of u/2**64 < threshold."""
    return u * threshold.denominator < threshold.numerator * TWO64
